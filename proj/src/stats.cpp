#include "twinbench/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace twinbench::stats {

namespace {

// Critical values q_alpha for k = 2..20 classifiers.
constexpr std::array<double, 19> kQ05 = {1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164, 3.219,
                                         3.268, 3.313, 3.354, 3.391, 3.426, 3.458, 3.489, 3.517, 3.544};
constexpr std::array<double, 19> kQ10 = {1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920, 2.978,
                                         3.030, 3.077, 3.120, 3.159, 3.196, 3.230, 3.261, 3.291, 3.319};

}  // namespace

RankMatrix rank_algorithms(const Matrix& scores) {
    require(scores.rows() > 0 && scores.cols() > 0, "rank_algorithms: empty score matrix");
    RankMatrix rm;
    std::vector<Index> keep;
    for (Index i = 0; i < scores.rows(); ++i) {
        if (scores.row(i).allFinite()) {
            keep.push_back(i);
        } else {
            rm.dropped_rows.push_back(i);
            rm.warnings.push_back("row " + std::to_string(i) + " has missing cells and was dropped");
        }
    }
    require(!keep.empty(), "rank_algorithms: every row has missing cells");
    rm.scores = take_rows(scores, keep);
    const Index n = rm.scores.rows(), k = rm.scores.cols();
    rm.ranks.resize(n, k);
    std::vector<Index> order(static_cast<std::size_t>(k));
    for (Index r = 0; r < n; ++r) {
        std::iota(order.begin(), order.end(), Index{0});
        std::sort(order.begin(), order.end(), [&](Index a, Index b) { return rm.scores(r, a) > rm.scores(r, b); });
        for (Index i = 0; i < k;) {
            Index j = i;
            while (j + 1 < k && rm.scores(r, order[static_cast<std::size_t>(j + 1)]) ==
                                    rm.scores(r, order[static_cast<std::size_t>(i)]))
                ++j;
            const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
            for (Index t = i; t <= j; ++t) rm.ranks(r, order[static_cast<std::size_t>(t)]) = mid;
            i = j + 1;
        }
    }
    rm.avg_ranks = rm.ranks.colwise().mean().transpose();
    return rm;
}

double friedman_chi2(const Vector& avg_ranks, Index n) {
    const auto k = static_cast<double>(avg_ranks.size());
    require(avg_ranks.size() >= 2, "friedman_chi2: need at least two algorithms");
    require(n >= 1, "friedman_chi2: need at least one row");
    const auto nn = static_cast<double>(n);
    return 12.0 * nn / (k * (k + 1.0)) * (avg_ranks.squaredNorm() - k * (k + 1.0) * (k + 1.0) / 4.0);
}

double friedman_chi2(const RankMatrix& rm) { return friedman_chi2(rm.avg_ranks, rm.n()); }

double iman_davenport(double chi2, Index n, Index k) {
    require(n >= 2 && k >= 2, "iman_davenport: need N >= 2 and k >= 2");
    const double denom = static_cast<double>(n) * static_cast<double>(k - 1) - chi2;
    require(denom > 0.0, "iman_davenport: N(k-1) must exceed chi2");
    return static_cast<double>(n - 1) * chi2 / denom;
}

double nemenyi_cd(Index k, Index n, double q_alpha) {
    require(k > 0 && n > 0, "nemenyi_cd: k and N must be positive");
    require(q_alpha > 0.0 && std::isfinite(q_alpha), "nemenyi_cd: q_alpha must be positive");
    const auto kk = static_cast<double>(k);
    return q_alpha * std::sqrt(kk * (kk + 1.0) / (6.0 * static_cast<double>(n)));
}

double nemenyi_q(Index k, double alpha) {
    require(k >= 2 && k <= 20, "nemenyi_q: table covers k = 2..20");
    const auto i = static_cast<std::size_t>(k - 2);
    if (std::abs(alpha - 0.05) < 1e-12) return kQ05[i];
    if (std::abs(alpha - 0.10) < 1e-12) return kQ10[i];
    throw InvalidArgument("nemenyi_q: alpha must be 0.05 or 0.10");
}

std::vector<PairDifference> pairwise(const Vector& avg_ranks, double cd) {
    std::vector<PairDifference> out;
    for (Index i = 0; i < avg_ranks.size(); ++i)
        for (Index j = i + 1; j < avg_ranks.size(); ++j) {
            const double diff = std::abs(avg_ranks(i) - avg_ranks(j));
            out.push_back({i, j, diff, diff >= cd});
        }
    return out;
}

FriedmanReport analyze(const Matrix& scores, double alpha) {
    FriedmanReport rep;
    rep.ranks = rank_algorithms(scores);
    const Index n = rep.ranks.n(), k = rep.ranks.k();
    require(k >= 2, "analyze: need at least two algorithms");
    rep.chi2 = friedman_chi2(rep.ranks);
    const double denom = static_cast<double>(n) * static_cast<double>(k - 1) - rep.chi2;
    rep.ff = n >= 2 && denom > 0.0 ? iman_davenport(rep.chi2, n, k) : std::numeric_limits<double>::quiet_NaN();
    rep.q = nemenyi_q(k, alpha);
    rep.cd = nemenyi_cd(k, n, rep.q);
    rep.pairs = pairwise(rep.ranks.avg_ranks, rep.cd);
    return rep;
}

}  // namespace twinbench::stats
