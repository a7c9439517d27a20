#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "twinbench/kernels.hpp"

#include <cmath>

using namespace twinbench;
using namespace twinbench::kernels;

TEST_CASE("linear kernel is a dot product") {
    const Matrix a = (Matrix(1, 2) << 1, 0).finished();
    CHECK(gram(a, a, KernelSpec::linear())(0, 0) == 1.0);
}

TEST_CASE("gaussian kernel values") {
    const Matrix a = (Matrix(2, 2) << 0, 0, 1, 0).finished();
    const Matrix k = gram(a, a, KernelSpec::gaussian(1.0));
    CHECK(k(0, 0) == 1.0);
    CHECK(k(0, 1) == doctest::Approx(0.36788).epsilon(1e-5));
    CHECK(k(0, 1) == doctest::Approx(std::exp(-1.0)));
}

TEST_CASE("gram rejects mismatched columns and a non positive gamma") {
    CHECK_THROWS_AS(gram(Matrix::Zero(2, 3), Matrix::Zero(2, 2), KernelSpec::linear()), DimensionError);
    CHECK_THROWS_AS(KernelSpec::gaussian(0.0), InvalidArgument);
    CHECK_THROWS_AS(KernelSpec::gaussian(-1.0), InvalidArgument);
}

TEST_CASE("property: gaussian gram is symmetric with unit diagonal") {
    Rng rng(1);
    for (double gamma : {std::pow(2.0, -10), 0.125, 1.0, std::pow(2.0, 10)}) {
        const Matrix a = oracle::random_matrix(12, 4, rng, -2, 2);
        const Matrix k = gram(a, a, KernelSpec::gaussian(gamma));
        CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
        for (Index i = 0; i < k.rows(); ++i) CHECK(k(i, i) == 1.0);
        CHECK(k.minCoeff() >= 0.0);
        CHECK(k.maxCoeff() <= 1.0);
    }
}

TEST_CASE("property: gaussian entries are positive for moderate distances") {
    Rng rng(4);
    const Matrix a = oracle::random_matrix(8, 3, rng);
    const Matrix k = gram(a, a, KernelSpec::gaussian(0.5));
    CHECK(k.minCoeff() > 0.0);
}

TEST_CASE("property: linear gram equals the matrix product") {
    Rng rng(2);
    const Matrix a = oracle::random_matrix(7, 5, rng), c = oracle::random_matrix(9, 5, rng);
    CHECK((gram(a, c, KernelSpec::linear()) - a * c.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gaussian gram matches the definition entry by entry") {
    Rng rng(3);
    const Matrix a = oracle::random_matrix(5, 3, rng), c = oracle::random_matrix(4, 3, rng);
    const Matrix k = gram(a, c, KernelSpec::gaussian(0.7));
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < c.rows(); ++j)
            CHECK(k(i, j) == doctest::Approx(std::exp(-0.7 * (a.row(i) - c.row(j)).squaredNorm())).epsilon(1e-12));
}

TEST_CASE("kernel description") {
    CHECK(KernelSpec::linear().describe().find("linear") != std::string::npos);
    CHECK(KernelSpec::gaussian(0.5).is_linear() == false);
}
