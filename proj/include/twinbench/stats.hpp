#pragma once

// Friedman test over an N x k score matrix (N datasets or feature-selection
// methods, k algorithms), the Iman-Davenport correction and the Nemenyi
// critical difference.

#include "twinbench/matrix.hpp"

#include <string>
#include <vector>

namespace twinbench::stats {

struct RankMatrix {
    Matrix scores;  // rows kept after dropping incomplete ones
    Matrix ranks;   // 1 = best (highest score), ties share the mean rank
    Vector avg_ranks;
    std::vector<Index> dropped_rows;  // input rows removed for NaN cells
    std::vector<std::string> warnings;

    Index n() const { return ranks.rows(); }
    Index k() const { return ranks.cols(); }
};

RankMatrix rank_algorithms(const Matrix& scores);

/// chi2_F = 12N / (k(k+1)) * (sum_j R_j^2 - k(k+1)^2 / 4).
double friedman_chi2(const RankMatrix& rm);
double friedman_chi2(const Vector& avg_ranks, Index n);

/// F_F = (N-1) chi2 / (N(k-1) - chi2); throws InvalidArgument when N(k-1) <= chi2.
double iman_davenport(double chi2, Index n, Index k);

/// CD = q * sqrt(k(k+1) / (6N)); throws InvalidArgument unless q, k, N > 0.
double nemenyi_cd(Index k, Index n, double q_alpha);

/// Two-tailed Nemenyi critical values (studentized range / sqrt 2), k = 2..20,
/// alpha in {0.05, 0.10}.
double nemenyi_q(Index k, double alpha);

struct PairDifference {
    Index i = 0, j = 0;
    double difference = 0.0;  // |R_i - R_j|
    bool significant = false;
};

std::vector<PairDifference> pairwise(const Vector& avg_ranks, double cd);

struct FriedmanReport {
    RankMatrix ranks;
    double chi2 = 0.0;
    double ff = 0.0;  // NaN when the Iman-Davenport denominator vanishes
    double q = 0.0;
    double cd = 0.0;
    std::vector<PairDifference> pairs;
};

FriedmanReport analyze(const Matrix& scores, double alpha);

}  // namespace twinbench::stats
