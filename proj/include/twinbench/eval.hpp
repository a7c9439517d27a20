#pragma once

// Classification metrics, k-fold cross-validation of a full
// rank -> select -> standardize -> train pipeline, and grid search.

#include "twinbench/classifiers.hpp"
#include "twinbench/data.hpp"
#include "twinbench/featsel.hpp"

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace twinbench::eval {

using classifiers::Params;

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
};

/// Positive class is +1 (patient).
ConfusionCounts confusion(const Vector& y, const Vector& predicted);

/// Undefined entries (zero denominators) are NaN.
struct MetricSet {
    double accuracy = 0.0;
    double auc = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double precision = 0.0;
    double f_measure = 0.0;
    double g_mean = 0.0;

    static const std::vector<std::string>& names();  // field names in declaration order
    double get(const std::string& name) const;
    void set(const std::string& name, double v);
};

/// Mann-Whitney AUC with half credit for tied scores; NaN if a class is absent.
double auc_mann_whitney(const Vector& scores, const Vector& y);

MetricSet metrics(const ConfusionCounts& c, const Vector& scores, const Vector& y);

struct Pipeline {
    featsel::Criterion criterion = featsel::Criterion::TTest;
    Index feature_count = 1;
    std::string classifier;
    Params params;  // may carry "nca_lambda_exp": lambda = 2^i / n_train
    bool standardize = true;
    bool rank_on_full = false;
    std::size_t mrmr_greedy_limit = 0;
    std::uint64_t seed = 0;  // per-cell seed; the per-fold training seed derives from it
};

/// Shared, thread-safe memo of rankings keyed by fold, criterion and NCA lambda.
class RankingCache {
public:
    featsel::Ranking get(const data::Dataset& ds, const std::vector<Index>& rows, int fold, const Pipeline& p);
    std::size_t size() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, featsel::Ranking> entries_;
};

/// Ranking used for one fold (training rows only unless rank_on_full).
featsel::Ranking fold_ranking(const data::Dataset& ds, const std::vector<Index>& rows, const Pipeline& p);

struct CellResult {
    std::string classifier;
    featsel::Criterion criterion = featsel::Criterion::TTest;
    Index feature_count = 0;
    std::string matter;
    Params chosen;
    std::vector<MetricSet> folds;
    std::vector<bool> skipped;                // fold had a single-class training split
    MetricSet mean;
    std::map<std::string, int> excluded;      // folds left out of each metric's mean
    std::vector<std::pair<Params, MetricSet>> grid;  // every grid point's mean, in evaluation order
};

/// Unweighted fold mean, skipping skipped folds and NaN entries.
MetricSet mean_metrics(const std::vector<MetricSet>& folds, const std::vector<bool>& skipped,
                       std::map<std::string, int>* excluded = nullptr);

CellResult cross_validate(const data::Dataset& ds, const data::FoldPlan& plan, const Pipeline& p,
                          RankingCache* cache = nullptr);

/// Every grid point through cross_validate; the best mean accuracy wins,
/// earliest grid point on ties (NaN accuracy never beats a number).
CellResult grid_evaluate(const data::Dataset& ds, const data::FoldPlan& plan, const Pipeline& base,
                         const std::vector<Params>& grid, RankingCache* cache = nullptr);

}  // namespace twinbench::eval
