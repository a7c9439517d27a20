#include "twinbench/eval.hpp"

#include "twinbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace twinbench::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double ratio(double num, double den) { return den > 0.0 ? num / den : kNaN; }

using Field = double MetricSet::*;
const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> f = {
        {"accuracy", &MetricSet::accuracy},   {"auc", &MetricSet::auc},
        {"sensitivity", &MetricSet::sensitivity}, {"specificity", &MetricSet::specificity},
        {"precision", &MetricSet::precision}, {"f_measure", &MetricSet::f_measure},
        {"g_mean", &MetricSet::g_mean},
    };
    return f;
}

Field field(const std::string& name) {
    for (const auto& [n, f] : fields())
        if (n == name) return f;
    throw InvalidArgument("unknown metric '" + name + "'");
}

}  // namespace

ConfusionCounts confusion(const Vector& y, const Vector& predicted) {
    require_dims(y.size() == predicted.size(), "confusion: length mismatch");
    ConfusionCounts c;
    for (Index i = 0; i < y.size(); ++i) {
        const bool truth = y(i) > 0;
        const bool pred = predicted(i) > 0;
        if (truth && pred) ++c.tp;
        else if (truth) ++c.fn;
        else if (pred) ++c.fp;
        else ++c.tn;
    }
    return c;
}

const std::vector<std::string>& MetricSet::names() {
    static const std::vector<std::string> n = [] {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.push_back(f.first);
        return out;
    }();
    return n;
}

double MetricSet::get(const std::string& name) const { return this->*field(name); }
void MetricSet::set(const std::string& name, double v) { this->*field(name) = v; }

double auc_mann_whitney(const Vector& scores, const Vector& y) {
    require_dims(scores.size() == y.size(), "auc: length mismatch");
    const Index n = y.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores(a) < scores(b); });
    // mid-ranks of the pooled scores
    std::vector<double> rank(static_cast<std::size_t>(n));
    for (Index i = 0; i < n;) {
        Index j = i;
        while (j + 1 < n && scores(order[static_cast<std::size_t>(j + 1)]) == scores(order[static_cast<std::size_t>(i)]))
            ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Index t = i; t <= j; ++t) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = mid;
        i = j + 1;
    }
    double n_pos = 0.0, rank_sum = 0.0;
    for (Index i = 0; i < n; ++i)
        if (y(i) > 0) {
            n_pos += 1.0;
            rank_sum += rank[static_cast<std::size_t>(i)];
        }
    const double n_neg = static_cast<double>(n) - n_pos;
    if (n_pos == 0.0 || n_neg == 0.0) return kNaN;
    return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

MetricSet metrics(const ConfusionCounts& c, const Vector& scores, const Vector& y) {
    require(c.total() > 0, "metrics: empty input");
    require_dims(scores.size() == y.size(), "metrics: scores and labels differ in length");
    MetricSet m;
    const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
    const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
    m.accuracy = (tp + tn) / static_cast<double>(c.total());
    m.sensitivity = ratio(tp, tp + fn);
    m.specificity = ratio(tn, tn + fp);
    m.precision = ratio(tp, tp + fp);
    m.f_measure = std::isnan(m.precision) || std::isnan(m.sensitivity)
                      ? kNaN
                      : ratio(2.0 * m.precision * m.sensitivity, m.precision + m.sensitivity);
    m.g_mean = std::sqrt(m.sensitivity * m.specificity);
    m.auc = scores.size() > 0 ? auc_mann_whitney(scores, y) : kNaN;
    return m;
}

featsel::Ranking fold_ranking(const data::Dataset& ds, const std::vector<Index>& rows, const Pipeline& p) {
    const data::Dataset src = p.rank_on_full ? ds : ds.subset_rows(rows);
    using featsel::Criterion;
    switch (p.criterion) {
        case Criterion::MRMR:
            return featsel::rank_mrmr(src, 10, p.mrmr_greedy_limit);
        case Criterion::NCA: {
            const auto it = p.params.find("nca_lambda_exp");
            const double scale = it == p.params.end() ? 1.0 : std::ldexp(1.0, static_cast<int>(it->second));
            return featsel::rank_nca(src, scale / static_cast<double>(src.n()));
        }
        default:
            return featsel::rank_by_criterion(src, p.criterion);
    }
}

featsel::Ranking RankingCache::get(const data::Dataset& ds, const std::vector<Index>& rows, int fold,
                                   const Pipeline& p) {
    std::ostringstream key;
    key << (p.rank_on_full ? -1 : fold) << '|' << featsel::key(p.criterion) << '|' << p.mrmr_greedy_limit;
    if (p.criterion == featsel::Criterion::NCA) {
        const auto it = p.params.find("nca_lambda_exp");
        key << '|' << (it == p.params.end() ? 0.0 : it->second);
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = entries_.find(key.str());
        if (it != entries_.end()) return it->second;
    }
    featsel::Ranking r = fold_ranking(ds, rows, p);  // deterministic, so a racing duplicate is harmless
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.emplace(key.str(), std::move(r)).first->second;
}

std::size_t RankingCache::size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

MetricSet mean_metrics(const std::vector<MetricSet>& folds, const std::vector<bool>& skipped,
                       std::map<std::string, int>* excluded) {
    MetricSet mean;
    for (const std::string& name : MetricSet::names()) {
        double sum = 0.0;
        int used = 0, left_out = 0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            const double v = folds[f].get(name);
            if (skipped[f] || std::isnan(v)) {
                ++left_out;
                continue;
            }
            sum += v;
            ++used;
        }
        mean.set(name, used > 0 ? sum / used : kNaN);
        if (excluded) (*excluded)[name] = left_out;
    }
    return mean;
}

CellResult cross_validate(const data::Dataset& ds, const data::FoldPlan& plan, const Pipeline& p,
                          RankingCache* cache) {
    require(p.feature_count >= 1 && p.feature_count <= ds.d(), "cross_validate: feature_count must be in [1, d]");
    require_dims(static_cast<Index>(plan.assignments.size()) == ds.n(), "cross_validate: fold plan does not match data");
    CellResult cell;
    cell.classifier = p.classifier;
    cell.criterion = p.criterion;
    cell.feature_count = p.feature_count;
    cell.matter = data::to_string(ds.modality);
    cell.chosen = p.params;

    Params model_params = p.params;
    model_params.erase("nca_lambda_exp");

    for (int fold = 0; fold < plan.k; ++fold) {
        const std::vector<Index> train_rows = plan.train_indices(fold);
        const std::vector<Index> test_rows = plan.test_indices(fold);
        data::Dataset train = ds.subset_rows(train_rows);
        data::Dataset test = ds.subset_rows(test_rows);
        if (train.count(1.0) == 0 || train.count(-1.0) == 0 || test.n() == 0) {
            MetricSet nan_set;
            for (const std::string& name : MetricSet::names()) nan_set.set(name, kNaN);
            cell.folds.push_back(nan_set);
            cell.skipped.push_back(true);
            continue;
        }
        const featsel::Ranking r = cache ? cache->get(ds, train_rows, fold, p) : fold_ranking(ds, train_rows, p);
        train = featsel::select_top(r, p.feature_count, train);
        test = featsel::select_top(r, p.feature_count, test);
        if (p.standardize) std::tie(train, test) = data::standardize(train, test);

        const auto model = classifiers::train(p.classifier, train, model_params,
                                              derive_seed(p.seed, static_cast<std::uint64_t>(fold)));
        const svmfam::Prediction pred = model->predict(test.x);
        cell.folds.push_back(metrics(confusion(test.y, pred.labels), pred.scores, test.y));
        cell.skipped.push_back(false);
    }
    cell.mean = mean_metrics(cell.folds, cell.skipped, &cell.excluded);
    return cell;
}

CellResult grid_evaluate(const data::Dataset& ds, const data::FoldPlan& plan, const Pipeline& base,
                         const std::vector<Params>& grid, RankingCache* cache) {
    require(!grid.empty(), "grid_evaluate: grid is empty");
    CellResult best;
    bool have = false;
    std::vector<std::pair<Params, MetricSet>> audit;
    for (const Params& point : grid) {
        Pipeline p = base;
        for (const auto& [k, v] : point) p.params[k] = v;
        CellResult cell = cross_validate(ds, plan, p, cache);
        audit.emplace_back(cell.chosen, cell.mean);
        const double acc = cell.mean.accuracy;
        const bool better = !have || (!std::isnan(acc) && (std::isnan(best.mean.accuracy) || acc > best.mean.accuracy));
        if (better) {
            best = std::move(cell);
            have = true;
        }
    }
    best.grid = std::move(audit);
    return best;
}

}  // namespace twinbench::eval
