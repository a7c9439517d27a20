#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "twinbench/stats.hpp"

#include <cmath>
#include <limits>

using namespace twinbench;
using namespace twinbench::stats;

namespace {

// Mid-rank by counting: 1 + (number strictly better) + (number tied, excluding self) / 2.
Matrix count_ranks(const Matrix& s) {
    Matrix r(s.rows(), s.cols());
    for (Index i = 0; i < s.rows(); ++i)
        for (Index j = 0; j < s.cols(); ++j) {
            double better = 0.0, tied = 0.0;
            for (Index l = 0; l < s.cols(); ++l) {
                if (l == j) continue;
                if (s(i, l) > s(i, j)) better += 1.0;
                if (s(i, l) == s(i, j)) tied += 1.0;
            }
            r(i, j) = 1.0 + better + tied / 2.0;
        }
    return r;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// P(range of k standard normals <= w) by trapezoidal integration.
double range_cdf(double w, Index k) {
    const double pi = std::acos(-1.0);
    double sum = 0.0;
    const double h = 1e-3;
    for (double z = -9.0; z <= 9.0; z += h) {
        const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi);
        sum += phi * std::pow(normal_cdf(z + w) - normal_cdf(z), static_cast<double>(k - 1)) * h;
    }
    return static_cast<double>(k) * sum;
}

}  // namespace

TEST_CASE("distinct scores rank in descending order") {
    const Matrix s = (Matrix(1, 3) << 0.9, 0.8, 0.7).finished();
    const RankMatrix rm = rank_algorithms(s);
    CHECK(rm.ranks(0, 0) == 1.0);
    CHECK(rm.ranks(0, 1) == 2.0);
    CHECK(rm.ranks(0, 2) == 3.0);
}

TEST_CASE("tied scores share the mean rank") {
    const Matrix s = (Matrix(1, 3) << 0.9, 0.9, 0.7).finished();
    const RankMatrix rm = rank_algorithms(s);
    CHECK(rm.ranks(0, 0) == 1.5);
    CHECK(rm.ranks(0, 1) == 1.5);
    CHECK(rm.ranks(0, 2) == 3.0);
}

TEST_CASE("rows with missing cells are dropped with a warning") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const Matrix s = (Matrix(3, 2) << 0.9, 0.8, nan, 0.5, 0.1, 0.2).finished();
    const RankMatrix rm = rank_algorithms(s);
    CHECK(rm.n() == 2);
    REQUIRE(rm.dropped_rows.size() == 1);
    CHECK(rm.dropped_rows[0] == 1);
    CHECK(!rm.warnings.empty());
    CHECK(rm.avg_ranks(0) == 1.5);
    CHECK(rm.avg_ranks(1) == 1.5);
}

TEST_CASE("empty score matrices are rejected") {
    CHECK_THROWS(rank_algorithms(Matrix(0, 3)));
    CHECK_THROWS(rank_algorithms(Matrix(2, 0)));
}

TEST_CASE("fully tied ranks give a zero friedman statistic") {
    const Matrix s = Matrix::Constant(4, 5, 0.7);
    const RankMatrix rm = rank_algorithms(s);
    for (Index j = 0; j < rm.k(); ++j) CHECK(rm.avg_ranks(j) == 3.0);
    CHECK(friedman_chi2(rm) == doctest::Approx(0.0));
}

TEST_CASE("two rows of two algorithms give chi squared two") {
    const Matrix s = (Matrix(2, 2) << 0.9, 0.1, 0.8, 0.2).finished();
    const RankMatrix rm = rank_algorithms(s);
    CHECK(rm.avg_ranks(0) == 1.0);
    CHECK(rm.avg_ranks(1) == 2.0);
    CHECK(friedman_chi2(rm) == doctest::Approx(2.0));
}

TEST_CASE("friedman rejects a single algorithm") {
    Vector r(1);
    r << 1.0;
    CHECK_THROWS_AS(friedman_chi2(r, 5), InvalidArgument);
}

TEST_CASE("iman davenport reproduces the reported statistic") {
    CHECK(iman_davenport(54.48, 7, 12) == doctest::Approx(14.52).epsilon(0.01 / 14.52));
    CHECK(std::abs(iman_davenport(54.48, 7, 12) - 14.52) <= 0.01);
    CHECK(iman_davenport(0.0, 7, 12) == 0.0);
}

TEST_CASE("iman davenport guards its pole") {
    CHECK_THROWS_AS(iman_davenport(77.0, 7, 12), InvalidArgument);
    CHECK_THROWS_AS(iman_davenport(80.0, 7, 12), InvalidArgument);
    CHECK(iman_davenport(76.999, 7, 12) > 1e4);
}

TEST_CASE("nemenyi critical difference examples") {
    CHECK(std::abs(nemenyi_cd(12, 7, 3.268) - 6.30) <= 0.01);
    CHECK(nemenyi_cd(2, 6, 1.0) == doctest::Approx(0.4082).epsilon(1e-4));
    CHECK_THROWS_AS(nemenyi_cd(12, 7, 0.0), InvalidArgument);
    CHECK_THROWS_AS(nemenyi_cd(12, 0, 3.268), InvalidArgument);
}

TEST_CASE("q table contains the twelve algorithm value") {
    CHECK(nemenyi_q(12, 0.05) == 3.268);
    CHECK(nemenyi_q(2, 0.05) == doctest::Approx(1.960));
    CHECK_THROWS_AS(nemenyi_q(1, 0.05), InvalidArgument);
    CHECK_THROWS_AS(nemenyi_q(21, 0.05), InvalidArgument);
    CHECK_THROWS_AS(nemenyi_q(5, 0.01), InvalidArgument);
}

TEST_CASE("property: q table matches the studentized range quantile") {
    for (double alpha : {0.05, 0.10})
        for (Index k = 2; k <= 20; ++k) {
            const double q = nemenyi_q(k, alpha);
            CHECK_MESSAGE(std::abs(range_cdf(q * std::sqrt(2.0), k) - (1.0 - alpha)) <= 1e-3, "k=" << k);
            if (k > 2) CHECK(q > nemenyi_q(k - 1, alpha));
        }
}

TEST_CASE("pairwise flags differences at least the critical difference") {
    Vector r(3);
    r << 1.0, 2.0, 3.5;
    const std::vector<PairDifference> pairs = pairwise(r, 1.5);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].i == 0);
    CHECK(pairs[0].j == 1);
    CHECK(!pairs[0].significant);
    CHECK(pairs[1].difference == 2.5);
    CHECK(pairs[1].significant);
    CHECK(pairs[2].difference == 1.5);
    CHECK(pairs[2].significant);
}

TEST_CASE("analyze reports every statistic for seven by twelve scores") {
    Rng rng(7);
    const Matrix s = oracle::random_matrix(7, 12, rng, 0.5, 0.9);
    const FriedmanReport rep = analyze(s, 0.05);
    CHECK(rep.ranks.n() == 7);
    CHECK(rep.ranks.k() == 12);
    CHECK(rep.q == 3.268);
    CHECK(std::abs(rep.cd - 6.30) <= 0.01);
    CHECK(rep.pairs.size() == 66);
    CHECK(rep.chi2 == doctest::Approx(friedman_chi2(rep.ranks.avg_ranks, 7)));
    CHECK(rep.ff == doctest::Approx(iman_davenport(rep.chi2, 7, 12)));
}

TEST_CASE("analyze leaves the corrected statistic undefined at the pole") {
    // identical orderings in every row make chi2 reach N(k-1)
    const Matrix s = (Matrix(3, 3) << 3, 2, 1, 3, 2, 1, 3, 2, 1).finished();
    const FriedmanReport rep = analyze(s, 0.05);
    CHECK(rep.chi2 == doctest::Approx(6.0));
    CHECK(std::isnan(rep.ff));
}

TEST_CASE("property: ranks match a counting oracle and rows sum to k(k+1)/2") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const Index n = 1 + static_cast<Index>(uniform_index(rng, 8));
        const Index k = 2 + static_cast<Index>(uniform_index(rng, 11));
        Matrix s(n, k);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < k; ++j) s(i, j) = static_cast<double>(uniform_index(rng, 4));
        const RankMatrix rm = rank_algorithms(s);
        CHECK((rm.ranks - count_ranks(s)).cwiseAbs().maxCoeff() == 0.0);
        for (Index i = 0; i < n; ++i) CHECK(rm.ranks.row(i).sum() == doctest::Approx(k * (k + 1) / 2.0));
        CHECK(rm.avg_ranks.sum() == doctest::Approx(k * (k + 1) / 2.0));
    }
}

TEST_CASE("property: friedman statistic is invariant under monotone row transforms") {
    Rng rng(9);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix s = oracle::random_matrix(6, 5, rng, 0.1, 1.0);
        Matrix t = s;
        for (Index i = 0; i < s.rows(); ++i) {
            const double a = uniform(rng, 0.5, 3.0);
            for (Index j = 0; j < s.cols(); ++j) t(i, j) = i % 2 == 0 ? a * s(i, j) : std::exp(a * s(i, j)) + 1.0;
        }
        CHECK(friedman_chi2(rank_algorithms(t)) == friedman_chi2(rank_algorithms(s)));
    }
}

TEST_CASE("property: critical difference is regression locked") {
    const double cd = nemenyi_cd(12, 7, nemenyi_q(12, 0.05));
    CHECK(cd == doctest::Approx(3.268 * std::sqrt(12.0 * 13.0 / 42.0)).epsilon(1e-14));
    CHECK(std::abs(cd - 6.30) <= 0.01);
}
