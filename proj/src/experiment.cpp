#include "twinbench/experiment.hpp"

#include "twinbench/rng.hpp"
#include "twinbench/stats.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace twinbench::experiment {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
const std::vector<std::string> kTableMetrics = {"auc", "sensitivity", "specificity", "precision", "f_measure",
                                                "g_mean"};

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double number_or_nan(const json& j) { return j.is_number() ? j.get<double>() : kNaN; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot read " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + p.string());
        out << text;
    }
    fs::rename(tmp, p);
}

json params_json(const classifiers::Params& p) {
    json j = json::object();
    for (const auto& [k, v] : p) j[k] = v;
    return j;
}

classifiers::Params params_from(const json& j) {
    classifiers::Params p;
    for (auto it = j.begin(); it != j.end(); ++it) p[it.key()] = it.value().get<double>();
    return p;
}

json metrics_json(const eval::MetricSet& m) {
    json j = json::object();
    for (const std::string& name : eval::MetricSet::names()) j[name] = number(m.get(name));
    return j;
}

eval::MetricSet metrics_from(const json& j) {
    eval::MetricSet m;
    for (const std::string& name : eval::MetricSet::names()) m.set(name, j.contains(name) ? number_or_nan(j[name]) : kNaN);
    return m;
}

json cell_json(const std::string& id, const eval::CellResult& c, std::uint64_t seed) {
    const classifiers::ClassifierInfo& info = classifiers::lookup(c.classifier);
    json j;
    j["id"] = id;
    j["status"] = "ok";
    j["matter"] = c.matter;
    j["classifier"] = c.classifier;
    j["display"] = info.display;
    j["file"] = classifiers::to_string(info.file);
    j["family"] = info.family;
    j["criterion"] = featsel::key(c.criterion);
    j["feature_count"] = c.feature_count;
    j["seed"] = seed;
    j["chosen"] = params_json(c.chosen);
    j["mean"] = metrics_json(c.mean);
    j["excluded"] = c.excluded;
    j["folds"] = json::array();
    for (const auto& f : c.folds) j["folds"].push_back(metrics_json(f));
    j["skipped"] = c.skipped;
    j["grid"] = json::array();
    for (const auto& [p, m] : c.grid) j["grid"].push_back({{"params", params_json(p)}, {"mean", metrics_json(m)}});
    return j;
}

json failed_cell_json(const std::string& id, data::Modality m, const std::string& classifier, featsel::Criterion c,
                      Index count, const std::string& error) {
    json j;
    j["id"] = id;
    j["status"] = "failed";
    j["error"] = error;
    j["matter"] = data::to_string(m);
    j["classifier"] = classifier;
    j["criterion"] = featsel::key(c);
    j["feature_count"] = count;
    return j;
}

std::string dump(const json& j) { return j.dump(1) + "\n"; }

std::vector<Index> int_list(const json& j, const std::string& what) {
    if (j.is_object()) {
        const Index start = j.at("start").get<Index>(), stop = j.at("stop").get<Index>(), step = j.at("step").get<Index>();
        if (step <= 0) throw ConfigError(what + ": step must be positive");
        std::vector<Index> v;
        for (Index x = start; x <= stop; x += step) v.push_back(x);
        return v;
    }
    if (!j.is_array()) throw ConfigError(what + ": expected a list or {start, stop, step}");
    return j.get<std::vector<Index>>();
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::string shorter(double v, int digits) {
    if (!std::isfinite(v)) return "NaN";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Classifier order for table rows: registry order, then extras.
std::vector<const classifiers::ClassifierInfo*> ordered_infos() {
    std::vector<const classifiers::ClassifierInfo*> out;
    for (const auto& i : classifiers::registry()) out.push_back(&i);
    for (const auto& i : classifiers::extras()) out.push_back(&i);
    return out;
}

std::string svg_chart(const std::string& title, const std::vector<Index>& xs, const std::vector<std::string>& groups,
                      const std::vector<std::vector<double>>& ys) {
    const double w = 640, h = 400, left = 60, right = 170, top = 40, bottom = 50;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : ys)
        for (double v : row)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    if (!std::isfinite(lo)) lo = 0, hi = 1;
    if (hi - lo < 1e-9) lo -= 1, hi += 1;
    const double xmin = xs.empty() ? 0 : static_cast<double>(xs.front());
    const double xmax = xs.empty() ? 1 : std::max(static_cast<double>(xs.back()), xmin + 1);
    auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (w - left - right); };
    auto py = [&](double y) { return h - bottom - (y - lo) / (hi - lo) * (h - top - bottom); };
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<text x=\"" << left << "\" y=\"24\" font-size=\"14\">" << title << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << h - bottom << "\" x2=\"" << w - right << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << h - bottom
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left - 50 << "\" y=\"" << py(hi) + 4 << "\" font-size=\"10\">" << shorter(hi, 2) << "</text>\n";
    os << "<text x=\"" << left - 50 << "\" y=\"" << py(lo) + 4 << "\" font-size=\"10\">" << shorter(lo, 2) << "</text>\n";
    for (Index x : xs)
        os << "<text x=\"" << px(static_cast<double>(x)) - 10 << "\" y=\"" << h - bottom + 16 << "\" font-size=\"9\">"
           << x << "</text>\n";
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const char* color = colors[g % 10];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
        for (std::size_t r = 0; r < xs.size(); ++r)
            if (std::isfinite(ys[r][g])) os << px(static_cast<double>(xs[r])) << ',' << py(ys[r][g]) << ' ';
        os << "\"/>\n";
        os << "<text x=\"" << w - right + 10 << "\" y=\"" << top + 14 * static_cast<double>(g) << "\" font-size=\"10\" fill=\""
           << color << "\">" << groups[g] << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace

// ---- config ----

std::vector<Index> ExperimentConfig::default_feature_counts() {
    std::vector<Index> v;
    for (Index c = 100; c <= 1300; c += 100) v.push_back(c);
    return v;
}

std::vector<int> ExperimentConfig::default_nca_exponents() {
    std::vector<int> v;
    for (int i = 1; i <= 20; ++i) v.push_back(i);
    return v;
}

void ExperimentConfig::validate() const {
    if (!synthetic && gm_path.empty() && wm_path.empty()) throw ConfigError("config: no data paths and no synthetic block");
    if (matters.empty()) throw ConfigError("config: matter list is empty");
    for (data::Modality m : matters) {
        if (synthetic) continue;
        if ((m == data::Modality::GM || m == data::Modality::CM) && gm_path.empty())
            throw ConfigError("config: matter " + data::to_string(m) + " needs data.gm");
        if ((m == data::Modality::WM || m == data::Modality::CM) && wm_path.empty())
            throw ConfigError("config: matter " + data::to_string(m) + " needs data.wm");
    }
    if (classifiers.empty()) throw ConfigError("config: classifier list is empty");
    for (const std::string& id : classifiers) {
        try {
            classifiers::lookup(id);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
    for (const auto& [id, g] : grids) {
        (void)g;
        try {
            classifiers::lookup(id);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("config: grids: ") + e.what());
        }
    }
    if (criteria.empty()) throw ConfigError("config: criterion list is empty");
    if (feature_counts.empty()) throw ConfigError("config: feature_counts is empty");
    for (std::size_t i = 0; i < feature_counts.size(); ++i) {
        if (feature_counts[i] < 1) throw ConfigError("config: feature counts must be positive");
        if (i > 0 && feature_counts[i] <= feature_counts[i - 1])
            throw ConfigError("config: feature counts must be strictly ascending");
    }
    if (folds < 2) throw ConfigError("config: folds must be >= 2");
    if (synthetic && (synthetic->n < 2 || synthetic->informative + synthetic->noise < 1))
        throw ConfigError("config: synthetic block is degenerate");
}

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    static const std::set<std::string> known = {"data",  "synthetic", "matters", "classifiers", "criteria",
                                                "feature_counts", "folds", "seed", "standardize", "rank_on_full",
                                                "tune",  "grids", "params", "nca_lambda_exponents"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw ConfigError("config: unknown key '" + it.key() + "'");

    ExperimentConfig cfg;
    try {
        auto resolve = [&](const std::string& s) {
            const fs::path p(s);
            return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
        };
        if (j.contains("data")) {
            const json& d = j["data"];
            if (d.contains("gm")) cfg.gm_path = resolve(d["gm"].get<std::string>());
            if (d.contains("wm")) cfg.wm_path = resolve(d["wm"].get<std::string>());
            if (d.contains("label_column")) cfg.label_column = d["label_column"].get<std::string>();
        }
        if (j.contains("synthetic")) {
            const json& s = j["synthetic"];
            SyntheticSpec spec;
            spec.n = s.value("n", spec.n);
            spec.informative = s.value("informative", spec.informative);
            spec.noise = s.value("noise", spec.noise);
            spec.shift = s.value("shift", spec.shift);
            spec.seed = s.value("seed", spec.seed);
            cfg.synthetic = spec;
        }
        if (j.contains("matters")) {
            cfg.matters.clear();
            for (const auto& m : j["matters"]) cfg.matters.push_back(data::parse_modality(m.get<std::string>()));
        }
        if (j.contains("classifiers")) {
            if (j["classifiers"].is_string() && j["classifiers"].get<std::string>() == "default")
                cfg.classifiers = classifiers::default_ids();
            else
                cfg.classifiers = j["classifiers"].get<std::vector<std::string>>();
        }
        if (j.contains("criteria")) {
            cfg.criteria.clear();
            for (const auto& c : j["criteria"]) cfg.criteria.push_back(featsel::parse_criterion(c.get<std::string>()));
        }
        if (j.contains("feature_counts")) cfg.feature_counts = int_list(j["feature_counts"], "feature_counts");
        cfg.folds = j.value("folds", cfg.folds);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.standardize = j.value("standardize", cfg.standardize);
        cfg.rank_on_full = j.value("rank_on_full", cfg.rank_on_full);
        cfg.tune = j.value("tune", cfg.tune);
        if (j.contains("grids"))
            for (auto it = j["grids"].begin(); it != j["grids"].end(); ++it) {
                classifiers::Grid g;
                for (auto ax = it.value().begin(); ax != it.value().end(); ++ax)
                    g.push_back({ax.key(), ax.value().get<std::vector<double>>()});
                cfg.grids[it.key()] = g;
            }
        if (j.contains("params"))
            for (auto it = j["params"].begin(); it != j["params"].end(); ++it) cfg.params[it.key()] = params_from(it.value());
        if (j.contains("nca_lambda_exponents"))
            cfg.nca_lambda_exponents = j["nca_lambda_exponents"].get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return parse_config(text, path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) {
    json j;
    if (!cfg.gm_path.empty()) j["data"]["gm"] = cfg.gm_path.string();
    if (!cfg.wm_path.empty()) j["data"]["wm"] = cfg.wm_path.string();
    j["data"]["label_column"] = cfg.label_column;
    if (cfg.synthetic) {
        const SyntheticSpec& s = *cfg.synthetic;
        j["synthetic"] = {{"n", s.n}, {"informative", s.informative}, {"noise", s.noise}, {"shift", s.shift},
                          {"seed", s.seed}};
    }
    j["matters"] = json::array();
    for (auto m : cfg.matters) j["matters"].push_back(data::to_string(m));
    j["classifiers"] = cfg.classifiers;
    j["criteria"] = json::array();
    for (auto c : cfg.criteria) j["criteria"].push_back(featsel::key(c));
    j["feature_counts"] = cfg.feature_counts;
    j["folds"] = cfg.folds;
    j["seed"] = cfg.seed;
    j["standardize"] = cfg.standardize;
    j["rank_on_full"] = cfg.rank_on_full;
    j["tune"] = cfg.tune;
    j["grids"] = json::object();
    for (const auto& [id, g] : cfg.grids)
        for (const auto& ax : g) j["grids"][id][ax.name] = ax.values;
    j["params"] = json::object();
    for (const auto& [id, p] : cfg.params) j["params"][id] = params_json(p);
    j["nca_lambda_exponents"] = cfg.nca_lambda_exponents;
    return dump(j);
}

void apply_env_overrides(ExperimentConfig& cfg) {
    const char* s = std::getenv("TWINBENCH_SEED");
    if (!s || !*s) return;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (!end || *end != '\0') throw ConfigError("TWINBENCH_SEED must be a non-negative integer");
    cfg.seed = v;
}

data::Dataset load_matter(const ExperimentConfig& cfg, data::Modality m) {
    auto load = [&](data::Modality part) {
        data::Dataset ds;
        if (cfg.synthetic) {
            const SyntheticSpec& s = *cfg.synthetic;
            ds = data::make_informative(s.n, s.informative, s.noise, s.shift,
                                        derive_seed(s.seed, data::to_string(part)));
            for (Index i = 0; i < ds.n(); ++i) ds.subject_ids.push_back("s" + std::to_string(i));
            for (auto& f : ds.feature_ids) f = data::to_string(part) + "_" + f;
        } else {
            ds = data::load_csv(part == data::Modality::GM ? cfg.gm_path : cfg.wm_path, cfg.label_column);
        }
        ds.modality = part;
        return ds;
    };
    if (m == data::Modality::CM) return data::combine_modalities(load(data::Modality::GM), load(data::Modality::WM));
    return load(m);
}

std::string cell_id(data::Modality m, const std::string& classifier, featsel::Criterion c, Index feature_count) {
    return data::to_string(m) + "__" + classifier + "__" + featsel::key(c) + "__" + std::to_string(feature_count);
}

std::vector<classifiers::Params> cell_grid(const ExperimentConfig& cfg, const std::string& classifier,
                                           featsel::Criterion c) {
    const classifiers::ClassifierInfo& info = classifiers::lookup(classifier);
    classifiers::Params base;
    if (const auto it = cfg.params.find(classifier); it != cfg.params.end()) base = it->second;
    classifiers::Grid grid;
    if (cfg.tune) {
        const auto it = cfg.grids.find(classifier);
        grid = it != cfg.grids.end() ? it->second : info.grid;
        // a fixed override removes that axis from the search
        grid.erase(std::remove_if(grid.begin(), grid.end(), [&](const classifiers::Axis& a) { return base.count(a.name) > 0; }),
                   grid.end());
        if (c == featsel::Criterion::NCA && !cfg.nca_lambda_exponents.empty()) {
            classifiers::Axis ax{"nca_lambda_exp", {}};
            for (int e : cfg.nca_lambda_exponents) ax.values.push_back(e);
            grid.push_back(ax);
        }
    }
    return classifiers::expand_grid(grid, base);
}

// ---- hashing and manifest ----

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return os.str();
}

std::string sha256_file(const fs::path& p) { return sha256_hex(read_file(p)); }

namespace {

std::string manifest_text(const std::map<std::string, std::string>& files) {
    json j;
    j["files"] = json::object();
    for (const auto& [k, v] : files) j["files"][k] = v;
    return dump(j);
}

}  // namespace

void write_manifest(const fs::path& store) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(store)) {
        if (!e.is_regular_file()) continue;
        const std::string rel = fs::relative(e.path(), store).generic_string();
        if (rel == "manifest.json" || (rel.size() >= 4 && rel.compare(rel.size() - 4, 4, ".tmp") == 0)) continue;
        files[rel] = sha256_file(e.path());
    }
    write_file(store / "manifest.json", manifest_text(files));
}

std::map<std::string, std::string> read_manifest(const fs::path& store) {
    std::map<std::string, std::string> out;
    const fs::path p = store / "manifest.json";
    if (!fs::exists(p)) return out;
    try {
        const json j = json::parse(read_file(p));
        for (auto it = j.at("files").begin(); it != j.at("files").end(); ++it) out[it.key()] = it.value().get<std::string>();
    } catch (const json::exception&) {
        return {};
    }
    return out;
}

// ---- running ----

RunSummary run(const ExperimentConfig& cfg, const RunOptions& opt) {
    cfg.validate();
    require(opt.jobs >= 1, "run: jobs must be >= 1");
    if (!opt.resume) {
        // a fresh run owns these directories; stale cells would leak into the tables
        for (const char* sub : {"cells", "tables", "curves"}) fs::remove_all(opt.out / sub);
        fs::remove(opt.out / "manifest.json");
    }
    fs::create_directories(opt.out / "cells");

    struct Task {
        data::Modality matter;
        std::string classifier;
        featsel::Criterion criterion;
        Index count;
        std::string id;
    };
    std::map<data::Modality, data::Dataset> datasets;
    std::map<data::Modality, data::FoldPlan> plans;
    std::map<data::Modality, std::unique_ptr<eval::RankingCache>> caches;
    for (data::Modality m : cfg.matters) {
        data::Dataset ds;
        try {
            ds = load_matter(cfg, m);
            ds.validate();
        } catch (const data::DataError& e) {
            throw ConfigError(std::string("data: ") + e.what());
        }
        if (cfg.feature_counts.back() > ds.d())
            throw ConfigError("config: feature count " + std::to_string(cfg.feature_counts.back()) + " exceeds the " +
                              std::to_string(ds.d()) + " features of " + data::to_string(m));
        try {
            plans[m] = data::stratified_kfold(ds, cfg.folds, derive_seed(cfg.seed, data::to_string(m)));
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("data: ") + e.what());
        }
        datasets[m] = std::move(ds);
        caches[m] = std::make_unique<eval::RankingCache>();
    }

    std::map<std::string, std::string> manifest = opt.resume ? read_manifest(opt.out) : std::map<std::string, std::string>{};
    std::vector<Task> tasks;
    RunSummary summary;
    for (data::Modality m : cfg.matters)
        for (featsel::Criterion c : cfg.criteria)
            for (Index count : cfg.feature_counts)
                for (const std::string& cls : cfg.classifiers) {
                    const std::string id = cell_id(m, cls, c, count);
                    ++summary.total;
                    const std::string rel = "cells/" + id + ".json";
                    if (opt.resume && manifest.count(rel) && fs::exists(opt.out / rel)) {
                        try {
                            const std::string text = read_file(opt.out / rel);
                            if (sha256_hex(text) == manifest[rel] && json::parse(text).value("status", "") == "ok") {
                                ++summary.reused;
                                continue;
                            }
                        } catch (const std::exception&) {
                            // unreadable cell: recompute it
                        }
                    }
                    tasks.push_back({m, cls, c, count, id});
                }

    write_file(opt.out / "config.json", config_to_json(cfg));

    std::mutex writer;
    std::atomic<std::size_t> next{0};
    const std::size_t max_count = static_cast<std::size_t>(cfg.feature_counts.back());
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const Task& t = tasks[i];
            const std::uint64_t seed = derive_seed(cfg.seed, t.id);
            std::string text;
            bool failed = false;
            std::string error;
            try {
                eval::Pipeline p;
                p.classifier = t.classifier;
                p.criterion = t.criterion;
                p.feature_count = t.count;
                p.standardize = cfg.standardize;
                p.rank_on_full = cfg.rank_on_full;
                p.mrmr_greedy_limit = max_count;
                p.seed = seed;
                const eval::CellResult cell =
                    eval::grid_evaluate(datasets.at(t.matter), plans.at(t.matter), p,
                                        cell_grid(cfg, t.classifier, t.criterion), caches.at(t.matter).get());
                text = dump(cell_json(t.id, cell, seed));
            } catch (const std::exception& e) {
                failed = true;
                error = e.what();
                text = dump(failed_cell_json(t.id, t.matter, t.classifier, t.criterion, t.count, error));
            }
            std::lock_guard<std::mutex> lock(writer);
            const std::string rel = "cells/" + t.id + ".json";
            write_file(opt.out / rel, text);
            manifest[rel] = sha256_hex(text);
            write_file(opt.out / "manifest.json", manifest_text(manifest));
            ++summary.computed;
            if (failed) {
                ++summary.failed;
                summary.failures.push_back(t.id + ": " + error);
            }
            if (opt.log)
                *opt.log << "[" << summary.computed << "/" << tasks.size() << "] " << t.id
                         << (failed ? " FAILED: " + error : std::string(" ok")) << "\n";
        }
    };
    const int n_threads = std::max(1, std::min<int>(opt.jobs, static_cast<int>(tasks.size())));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    std::sort(summary.failures.begin(), summary.failures.end());

    const fs::path tables = opt.out / "tables";
    for (data::Modality m : cfg.matters)
        for (Index count : cfg.feature_counts) emit_tables(opt.out, m, count, tables, opt.log);
    for (Grouping g : {Grouping::ByFamily, Grouping::ByCriterion, Grouping::ByMatter})
        emit_curves(opt.out, g, opt.out / "curves");
    write_manifest(opt.out);
    return summary;
}

// ---- reading the store ----

std::vector<StoredCell> load_cells(const fs::path& store) {
    std::vector<StoredCell> out;
    const fs::path dir = store / "cells";
    if (!fs::exists(dir)) return out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
        const json j = json::parse(read_file(f));
        StoredCell sc;
        sc.id = j.at("id").get<std::string>();
        sc.ok = j.value("status", "") == "ok";
        sc.error = j.value("error", "");
        eval::CellResult& c = sc.result;
        c.classifier = j.at("classifier").get<std::string>();
        c.criterion = featsel::parse_criterion(j.at("criterion").get<std::string>());
        c.feature_count = j.at("feature_count").get<Index>();
        c.matter = j.at("matter").get<std::string>();
        if (sc.ok) {
            c.chosen = params_from(j.at("chosen"));
            c.mean = metrics_from(j.at("mean"));
            for (const auto& fj : j.at("folds")) c.folds.push_back(metrics_from(fj));
            c.skipped = j.at("skipped").get<std::vector<bool>>();
            c.excluded = j.at("excluded").get<std::map<std::string, int>>();
            for (const auto& g : j.at("grid")) c.grid.emplace_back(params_from(g.at("params")), metrics_from(g.at("mean")));
        } else {
            for (const std::string& name : eval::MetricSet::names()) c.mean.set(name, kNaN);
        }
        out.push_back(std::move(sc));
    }
    return out;
}

std::string format_percent(double v) {
    if (!std::isfinite(v)) return "NaN";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
    return buf;
}

std::vector<fs::path> emit_tables(const fs::path& store, data::Modality m, Index feature_count, const fs::path& out_dir,
                                  std::ostream* warnings) {
    const std::vector<StoredCell> cells = load_cells(store);
    const std::string matter = data::to_string(m);
    std::set<std::string> present;
    std::map<std::pair<std::string, std::string>, const StoredCell*> index;  // (classifier, criterion key)
    for (const StoredCell& c : cells) {
        present.insert(c.result.classifier);
        if (c.result.matter == matter && c.result.feature_count == feature_count)
            index[{c.result.classifier, featsel::key(c.result.criterion)}] = &c;
    }

    std::vector<fs::path> written;
    std::vector<std::string> metrics = {"accuracy"};
    metrics.insert(metrics.end(), kTableMetrics.begin(), kTableMetrics.end());
    for (const std::string& metric : metrics) {
        for (classifiers::TableFile file : {classifiers::TableFile::Lin, classifiers::TableFile::Nl}) {
            std::ostringstream os;
            os << "Methods";
            for (featsel::Criterion c : featsel::all_criteria()) os << ',' << featsel::display_name(c);
            os << '\n';
            for (const classifiers::ClassifierInfo* info : ordered_infos()) {
                if (info->file != file || !present.count(info->id)) continue;
                os << csv_escape(info->display);
                for (featsel::Criterion c : featsel::all_criteria()) {
                    os << ',';
                    const auto it = index.find({info->id, featsel::key(c)});
                    if (it == index.end() || !it->second->ok) {
                        if (warnings)
                            *warnings << "warning: no result for " << matter << " " << feature_count << " "
                                      << info->id << " " << featsel::key(c) << "\n";
                        continue;
                    }
                    os << format_percent(it->second->result.mean.get(metric));
                }
                os << '\n';
            }
            const std::string stem = metric == "accuracy" ? "results" : metric;
            const fs::path p =
                out_dir / (matter + "_" + std::to_string(feature_count) + "_" + stem + "_" + classifiers::to_string(file) + ".csv");
            write_file(p, os.str());
            written.push_back(p);
        }
    }
    const fs::path note = out_dir / "NOTE.txt";
    write_file(note,
               "Each table entry is the mean cross-validated value (percent) of the best grid point for that cell.\n"
               "Selecting the best grid point on the same folds that report it is optimistically biased;\n"
               "treat these numbers as upper estimates, not as held-out performance.\n"
               "Undefined metrics (for example precision with no predicted patients) are written as NaN.\n");
    written.push_back(note);
    return written;
}

std::string to_string(Grouping g) {
    switch (g) {
        case Grouping::ByFamily: return "by_family";
        case Grouping::ByCriterion: return "by_criterion";
        case Grouping::ByMatter: return "by_matter";
    }
    return "?";
}

std::vector<fs::path> emit_curves(const fs::path& store, Grouping g, const fs::path& out_dir) {
    const std::vector<StoredCell> cells = load_cells(store);
    std::vector<std::string> groups;
    switch (g) {
        case Grouping::ByFamily: groups = {"SVM-family", "RaF-family", "Networks", "KNN", "KRR"}; break;
        case Grouping::ByCriterion:
            for (featsel::Criterion c : featsel::all_criteria()) groups.push_back(featsel::display_name(c));
            break;
        case Grouping::ByMatter: groups = {"GM", "WM", "CM"}; break;
    }
    std::set<Index> count_set;
    std::map<std::pair<Index, std::string>, std::pair<double, int>> acc;
    for (const StoredCell& c : cells) {
        if (!c.ok || !std::isfinite(c.result.mean.accuracy)) continue;
        std::string group;
        switch (g) {
            case Grouping::ByFamily: group = classifiers::lookup(c.result.classifier).family; break;
            case Grouping::ByCriterion: group = featsel::display_name(c.result.criterion); break;
            case Grouping::ByMatter: group = c.result.matter; break;
        }
        count_set.insert(c.result.feature_count);
        auto& slot = acc[{c.result.feature_count, group}];
        slot.first += c.result.mean.accuracy;
        slot.second += 1;
    }
    // keep only groups that have data
    std::vector<std::string> used;
    for (const std::string& grp : groups)
        for (Index count : count_set)
            if (acc.count({count, grp})) {
                used.push_back(grp);
                break;
            }
    const std::vector<Index> counts(count_set.begin(), count_set.end());
    std::vector<std::vector<double>> ys;
    std::ostringstream os;
    os << "feature_count";
    for (const std::string& grp : used) os << ',' << grp;
    os << '\n';
    for (Index count : counts) {
        os << count;
        std::vector<double> row;
        for (const std::string& grp : used) {
            const auto it = acc.find({count, grp});
            const double v = it == acc.end() ? kNaN : 100.0 * it->second.first / it->second.second;
            row.push_back(v);
            os << ',' << (std::isfinite(v) ? format_double(v) : std::string());
        }
        ys.push_back(row);
        os << '\n';
    }
    const std::string stem = "curves_" + to_string(g);
    const fs::path csv = out_dir / (stem + ".csv");
    const fs::path svg = out_dir / (stem + ".svg");
    write_file(csv, os.str());
    write_file(svg, svg_chart("Mean accuracy (%) " + to_string(g), counts, used, ys));
    return {csv, svg};
}

// ---- stats and ranking files ----

std::vector<fs::path> write_stats_report(const fs::path& scores_csv, double alpha, const fs::path& out_dir,
                                         std::ostream* notes) {
    std::ifstream in(scores_csv);
    if (!in) throw data::DataError("cannot open " + scores_csv.string());
    std::string line;
    if (!std::getline(in, line)) throw data::DataError(scores_csv.string() + ": empty file");
    const std::vector<std::string> header = split_csv_line(line);
    if (header.size() < 3) throw data::DataError(scores_csv.string() + ": need a label column and at least two classifiers");
    const std::vector<std::string> algos(header.begin() + 1, header.end());
    std::vector<std::string> row_names;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw data::DataError(scores_csv.string() + ": row '" + cells[0] + "' has the wrong number of cells");
        row_names.push_back(cells[0]);
        std::vector<double> r;
        for (std::size_t i = 1; i < cells.size(); ++i) {
            const std::string& s = cells[i];
            if (s.empty() || s == "NaN" || s == "nan") {
                r.push_back(kNaN);
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (end == s.c_str() || *end != '\0')
                throw data::DataError(scores_csv.string() + ": non-numeric cell '" + s + "'");
            r.push_back(v);
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw data::DataError(scores_csv.string() + ": no score rows");
    Matrix scores(static_cast<Index>(rows.size()), static_cast<Index>(algos.size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < algos.size(); ++j) scores(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];

    const stats::FriedmanReport rep = stats::analyze(scores, alpha);
    const Index n = rep.ranks.n(), k = rep.ranks.k();
    std::ostringstream f;
    f << "statistic,value\n";
    f << "N," << n << "\nk," << k << "\n";
    f << "chi2_F," << format_double(rep.chi2) << "\n";
    f << "F_F," << (std::isfinite(rep.ff) ? format_double(rep.ff) : std::string("NaN")) << "\n";
    f << "df1," << (k - 1) << "\ndf2," << (k - 1) * (n - 1) << "\n";
    f << "alpha," << format_double(alpha) << "\n";
    f << "q_alpha," << format_double(rep.q) << "\n";
    f << "CD," << format_double(rep.cd) << "\n";

    std::ostringstream r;
    r << "algorithm,average_rank\n";
    for (Index j = 0; j < k; ++j) r << csv_escape(algos[static_cast<std::size_t>(j)]) << ',' << format_double(rep.ranks.avg_ranks(j)) << '\n';

    std::ostringstream s;
    s << "algorithm_a,algorithm_b,rank_difference,critical_difference\n";
    for (const auto& pd : rep.pairs)
        if (pd.significant)
            s << csv_escape(algos[static_cast<std::size_t>(pd.i)]) << ',' << csv_escape(algos[static_cast<std::size_t>(pd.j)])
              << ',' << format_double(pd.difference) << ',' << format_double(rep.cd) << '\n';

    const std::vector<fs::path> files = {out_dir / "friedman.csv", out_dir / "ranks.csv", out_dir / "significant_pairs.csv"};
    write_file(files[0], f.str());
    write_file(files[1], r.str());
    write_file(files[2], s.str());
    if (notes) {
        for (const std::string& w : rep.ranks.warnings) *notes << "warning: " << w << "\n";
        if (n <= 10 || k <= 5)
            *notes << "note: the chi-square approximation is usually recommended only for N > 10 and k > 5; "
                      "computed anyway (N = "
                   << n << ", k = " << k << ").\n";
    }
    return files;
}

void write_ranking(const featsel::Ranking& rk, const data::Dataset& ds, const fs::path& out) {
    std::ostringstream os;
    os << "rank,feature_id,score,degenerate\n";
    for (std::size_t r = 0; r < rk.order.size(); ++r) {
        const auto f = static_cast<std::size_t>(rk.order[r]);
        os << r + 1 << ',' << csv_escape(ds.feature_ids[f]) << ',' << format_double(rk.scores[f]) << ','
           << (rk.degenerate.empty() ? 0 : int(rk.degenerate[f])) << '\n';
    }
    write_file(out, os.str());
}

}  // namespace twinbench::experiment
