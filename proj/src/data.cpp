#include "twinbench/data.hpp"

#include "twinbench/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace twinbench::data {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace

std::string to_string(Modality m) {
    switch (m) {
        case Modality::GM: return "GM";
        case Modality::WM: return "WM";
        case Modality::CM: return "CM";
    }
    return "?";
}

Modality parse_modality(const std::string& s) {
    if (s == "GM") return Modality::GM;
    if (s == "WM") return Modality::WM;
    if (s == "CM") return Modality::CM;
    throw InvalidArgument("unknown matter type '" + s + "'");
}

Index Dataset::count(double label) const { return (y.array() == label).count(); }

void Dataset::validate(bool require_both_classes) const {
    if (y.size() != x.rows()) throw DataError("dataset: label count does not match row count");
    if (static_cast<Index>(feature_ids.size()) != x.cols())
        throw DataError("dataset: feature id count does not match column count");
    if (!subject_ids.empty() && static_cast<Index>(subject_ids.size()) != x.rows())
        throw DataError("dataset: subject id count does not match row count");
    if (!x.allFinite()) throw DataError("dataset: non-finite feature value");
    for (Index i = 0; i < y.size(); ++i)
        if (y(i) != 1.0 && y(i) != -1.0) throw DataError("dataset: labels must be +1 or -1");
    if (require_both_classes && (count(1.0) == 0 || count(-1.0) == 0))
        throw DataError("dataset: both classes must be present");
}

Dataset Dataset::subset_rows(const std::vector<Index>& rows) const {
    Dataset out;
    out.x = take_rows(x, rows);
    out.y = take(y, rows);
    out.feature_ids = feature_ids;
    if (!subject_ids.empty())
        for (Index r : rows) out.subject_ids.push_back(subject_ids[static_cast<std::size_t>(r)]);
    out.modality = modality;
    return out;
}

Dataset Dataset::subset_cols(const std::vector<Index>& cols) const {
    Dataset out;
    out.x.resize(x.rows(), static_cast<Index>(cols.size()));
    Index c = 0;
    for (Index src : cols) {
        require_dims(src >= 0 && src < x.cols(), "subset_cols: column out of range");
        out.x.col(c++) = x.col(src);
        out.feature_ids.push_back(feature_ids[static_cast<std::size_t>(src)]);
    }
    out.y = y;
    out.subject_ids = subject_ids;
    out.modality = modality;
    return out;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open data file '" + path.string() + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("data file '" + path.string() + "' is empty");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end()) throw DataError("label column '" + label_column + "' not found");
    const auto label_col = static_cast<std::size_t>(label_it - header.begin());
    const bool has_subject = !header.empty() && header[0] == "subject_id";

    std::vector<std::size_t> feature_cols;
    Dataset ds;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == label_col || (has_subject && c == 0)) continue;
        feature_cols.push_back(c);
        ds.feature_ids.push_back(header[c]);
    }

    std::vector<std::vector<double>> rows;
    std::vector<double> labels;
    std::size_t row_no = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ++row_no;
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError("row " + std::to_string(row_no) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(header.size()));
        double label = 0.0;
        if (!parse_double(trim(cells[label_col]), label))
            throw DataError("non-numeric cell at (" + std::to_string(row_no) + "," + std::to_string(label_col + 1) + ")");
        if (label == 0.0) label = -1.0;
        if (label != 1.0 && label != -1.0)
            throw DataError("label at row " + std::to_string(row_no) + " must be 1, -1 or 0");
        labels.push_back(label);
        std::vector<double> row;
        row.reserve(feature_cols.size());
        for (std::size_t c : feature_cols) {
            double v = 0.0;
            if (!parse_double(trim(cells[c]), v))
                throw DataError("non-numeric cell at (" + std::to_string(row_no) + "," + std::to_string(c + 1) + ")");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
        if (has_subject) ds.subject_ids.push_back(trim(cells[0]));
    }
    if (rows.empty()) throw DataError("data file '" + path.string() + "' has no rows");

    ds.x.resize(static_cast<Index>(rows.size()), static_cast<Index>(feature_cols.size()));
    ds.y.resize(static_cast<Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        ds.y(static_cast<Index>(r)) = labels[r];
        for (std::size_t c = 0; c < feature_cols.size(); ++c)
            ds.x(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
    if (ds.count(1.0) == 0 || ds.count(-1.0) == 0) throw DataError("data file contains a single class");
    ds.validate();
    return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path, const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path.string() + "'");
    const bool subjects = !ds.subject_ids.empty();
    if (subjects) out << "subject_id,";
    out << label_column;
    for (const auto& f : ds.feature_ids) out << ',' << f;
    out << '\n';
    out << std::setprecision(17);
    for (Index i = 0; i < ds.n(); ++i) {
        if (subjects) out << ds.subject_ids[static_cast<std::size_t>(i)] << ',';
        out << (ds.y(i) > 0 ? 1 : -1);
        for (Index j = 0; j < ds.d(); ++j) out << ',' << ds.x(i, j);
        out << '\n';
    }
}

Dataset combine_modalities(const Dataset& gm, const Dataset& wm) {
    if (gm.n() != wm.n()) throw DataError("combine_modalities: subject counts differ");
    if (!gm.subject_ids.empty() && !wm.subject_ids.empty() && gm.subject_ids != wm.subject_ids)
        throw DataError("combine_modalities: subject ids differ");
    if (gm.y != wm.y) throw DataError("combine_modalities: labels differ");
    Dataset out;
    out.x.resize(gm.n(), gm.d() + wm.d());
    out.x.leftCols(gm.d()) = gm.x;
    out.x.rightCols(wm.d()) = wm.x;
    out.y = gm.y;
    out.feature_ids = gm.feature_ids;
    out.feature_ids.insert(out.feature_ids.end(), wm.feature_ids.begin(), wm.feature_ids.end());
    out.subject_ids = gm.subject_ids.empty() ? wm.subject_ids : gm.subject_ids;
    out.modality = Modality::CM;
    return out;
}

std::vector<Index> FoldPlan::test_indices(int fold) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) out.push_back(static_cast<Index>(i));
    return out;
}

std::vector<Index> FoldPlan::train_indices(int fold) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold) out.push_back(static_cast<Index>(i));
    return out;
}

FoldPlan stratified_kfold(const Dataset& ds, int k, std::uint64_t seed) {
    require(k >= 2, "stratified_kfold: k must be at least 2");
    std::vector<Index> pos, neg;
    for (Index i = 0; i < ds.n(); ++i) (ds.y(i) > 0 ? pos : neg).push_back(i);
    if (static_cast<Index>(pos.size()) < k || static_cast<Index>(neg.size()) < k)
        throw DataError("stratified_kfold: a class has fewer than k members");

    Rng rng(derive_seed(seed, "folds"));
    shuffle(pos, rng);
    shuffle(neg, rng);

    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignments.assign(static_cast<std::size_t>(ds.n()), -1);
    std::size_t slot = 0;
    for (const auto* group : {&pos, &neg}) {
        for (Index i : *group) plan.assignments[static_cast<std::size_t>(i)] = static_cast<int>(slot++ % static_cast<std::size_t>(k));
    }
    return plan;
}

std::pair<Dataset, Dataset> standardize(const Dataset& train, const Dataset& apply_to) {
    require_dims(train.d() == apply_to.d(), "standardize: feature counts differ");
    Dataset a = train;
    Dataset b = apply_to;
    const double n = static_cast<double>(train.n());
    for (Index j = 0; j < train.d(); ++j) {
        const double mean = train.x.col(j).mean();
        const double var = (train.x.col(j).array() - mean).square().sum() / n;
        const double sd = std::sqrt(var);
        if (sd < 1e-12) {
            a.x.col(j).setZero();
            b.x.col(j).setZero();
        } else {
            a.x.col(j) = (train.x.col(j).array() - mean) / sd;
            b.x.col(j) = (apply_to.x.col(j).array() - mean) / sd;
        }
    }
    return {std::move(a), std::move(b)};
}

Dataset make_blobs(Index n, Index d, double separation, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "blobs"));
    Dataset ds;
    ds.x.resize(n, d);
    ds.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double label = (i % 2 == 0) ? 1.0 : -1.0;
        ds.y(i) = label;
        for (Index j = 0; j < d; ++j) ds.x(i, j) = normal(rng) + label * separation / 2.0;
    }
    for (Index j = 0; j < d; ++j) ds.feature_ids.push_back("f" + std::to_string(j));
    return ds;
}

Dataset make_informative(Index n, Index informative, Index noise, double shift, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "informative"));
    const Index d = informative + noise;
    Dataset ds;
    ds.x.resize(n, d);
    ds.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        const double label = (i % 2 == 0) ? 1.0 : -1.0;
        ds.y(i) = label;
        for (Index j = 0; j < d; ++j) ds.x(i, j) = normal(rng) + (j < informative ? label * shift / 2.0 : 0.0);
    }
    for (Index j = 0; j < d; ++j) ds.feature_ids.push_back((j < informative ? "inf" : "noise") + std::to_string(j));
    return ds;
}

}  // namespace twinbench::data
