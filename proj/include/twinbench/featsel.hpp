#pragma once

// Filter rankings (t-test, ROC, Wilcoxon, entropy, Bhattacharyya), MRMR and
// NCA feature weighting, plus top-m selection.

#include "twinbench/data.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace twinbench::featsel {

enum class Criterion { TTest, ROC, Wilcoxon, Entropy, Bhattacharyya, MRMR, NCA };

/// All criteria in results-table column order.
const std::vector<Criterion>& all_criteria();
std::string display_name(Criterion c);  // "T-Test", "ROC", ...
std::string key(Criterion c);           // "ttest", "roc", ...
Criterion parse_criterion(const std::string& s);  // accepts key or display name, case-insensitive
bool is_filter(Criterion c);

struct Ranking {
    std::vector<Index> order;     // best first
    std::vector<double> scores;   // per feature (indexed by feature, not by rank)
    std::vector<bool> degenerate; // zero-variance features scored by convention
    Criterion criterion = Criterion::TTest;

    /// 1-based rank of each feature.
    std::vector<Index> ranks() const;
};

/// Descending score order, ties broken by ascending index.
std::vector<Index> order_by_score(const std::vector<double>& scores);

/// Per-feature filter score for one feature column.
struct FilterScore {
    double score = 0.0;
    bool degenerate = false;
};
FilterScore filter_score(Criterion c, const Vector& feature, const Vector& y);

Ranking rank_by_criterion(const data::Dataset& ds, Criterion c);

/// Equal-frequency discretization; tied values share a bin.
std::vector<int> equal_frequency_bins(const Vector& values, int bins);

/// Plug-in mutual information (nats) between two discrete sequences.
double mutual_information(const std::vector<int>& a, const std::vector<int>& b);

/// Greedy MID selection. When `greedy_limit` > 0 the greedy pass stops after
/// that many picks and the rest follow in order of their objective at the cut.
Ranking rank_mrmr(const data::Dataset& ds, int bins = 10, std::size_t greedy_limit = 0);

struct NcaOptions {
    double lambda = 0.0;
    std::size_t iters = 200;
    std::uint64_t seed = 0;
    double tol = 1e-10;
};

struct NcaResult {
    Vector weights;  // w_r; effective weights are w_r^2
    double initial_objective = 0.0;
    double final_objective = 0.0;
    std::size_t iterations = 0;
};

/// F(w) = (1/n) sum_i p_i - lambda * sum_r w_r^2 with d_w = sum_r w_r^2 (x_ir - x_jr)^2.
double nca_objective(const Matrix& x, const Vector& y, const Vector& w, double lambda, Vector* grad = nullptr);

/// Batch gradient ascent from w = 1 with Barzilai-Borwein trial steps and
/// Armijo backtracking. Deterministic; `seed` is recorded but not consumed.
NcaResult fit_nca(const Matrix& x, const Vector& y, const NcaOptions& opt);

Ranking rank_nca(const data::Dataset& ds, double lambda, std::size_t iters = 200, std::uint64_t seed = 0);

/// Columns of `ds` restricted to the first m entries of r.order.
data::Dataset select_top(const Ranking& r, Index m, const data::Dataset& ds);

}  // namespace twinbench::featsel
