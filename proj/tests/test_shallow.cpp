#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "twinbench/shallow.hpp"

#include <cmath>

using namespace twinbench;
using namespace twinbench::shallow;

namespace {

data::Dataset make(const Matrix& x, const Vector& y) {
    data::Dataset ds;
    ds.x = x;
    ds.y = y;
    for (Index j = 0; j < x.cols(); ++j) ds.feature_ids.push_back("f" + std::to_string(j));
    return ds;
}

double accuracy(const Vector& pred, const Vector& y) {
    return static_cast<double>((pred.array() == y.array()).count()) / static_cast<double>(y.size());
}

bool labels_are_signs(const Vector& v) { return ((v.array() == 1.0) || (v.array() == -1.0)).all(); }

}  // namespace

TEST_CASE("krr on a single point halves the label") {
    const data::Dataset ds = make(Matrix::Zero(1, 1), Vector::Ones(1));
    const KrrModel m = train_krr(ds, 1.0, KernelSpec::gaussian(1.0));
    CHECK(krr_decision(m, ds.x)(0) == doctest::Approx(0.5));
}

TEST_CASE("krr interpolates without shrinkage and vanishes under heavy shrinkage") {
    const data::Dataset ds = data::make_informative(12, 2, 1, 1.0, 3);
    const KrrModel exact = train_krr(ds, 0.0, KernelSpec::gaussian(1.0));
    CHECK((krr_decision(exact, ds.x) - ds.y).cwiseAbs().maxCoeff() <= 1e-6);
    const KrrModel flat = train_krr(ds, 1e9, KernelSpec::gaussian(1.0));
    CHECK(krr_decision(flat, ds.x).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK_THROWS_AS(train_krr(ds, -1.0, KernelSpec::linear()), InvalidArgument);
}

TEST_CASE("property: linear krr equals explicit ridge regression") {
    Rng rng(4);
    for (int t = 0; t < 5; ++t) {
        const data::Dataset ds = data::make_informative(30, 3, 2, 1.0, rng());
        const double lambda = 0.5 + t;
        const KrrModel m = train_krr(ds, lambda, KernelSpec::linear());
        const Vector w_kernel = ds.x.transpose() * m.coefficients;
        Matrix a = ds.x.transpose() * ds.x;
        a.diagonal().array() += lambda;
        const Vector w_ridge = oracle::gauss_solve(a, Vector(ds.x.transpose() * ds.y));
        CHECK((w_kernel - w_ridge).cwiseAbs().maxCoeff() <= 1e-8);
        const Matrix probe = oracle::random_matrix(10, 5, rng);
        CHECK((krr_decision(m, probe) - probe * w_ridge).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("knn with duplicated training points and with k one") {
    Matrix x(7, 1);
    x << 0, 0, 0, 0, 0, 5, 6;
    const Vector y = (Vector(7) << 1, 1, 1, 1, 1, -1, -1).finished();
    const data::Dataset ds = make(x, y);
    CHECK(predict_knn(ds, Matrix::Zero(1, 1), 5).labels(0) == 1.0);
    CHECK(predict_knn(ds, Matrix::Constant(1, 1, 5.4), 1).labels(0) == -1.0);
    CHECK_THROWS_AS(predict_knn(ds, Matrix::Zero(1, 1), 4), InvalidArgument);
    CHECK_THROWS_AS(predict_knn(ds, Matrix::Zero(1, 1), 9), InvalidArgument);
}

TEST_CASE("knn matches brute force distances on a small instance") {
    Rng rng(6);
    const Matrix x = oracle::random_matrix(10, 2, rng, -1, 1);
    const Vector y = (Vector(10) << 1, -1, 1, -1, 1, -1, 1, -1, 1, -1).finished();
    const Matrix q = oracle::random_matrix(20, 2, rng, -1, 1);
    for (int k : {1, 3, 5}) CHECK(predict_knn(make(x, y), q, k).labels == oracle::knn_labels(x, y, q, k));
}

TEST_CASE("knn breaks distance ties by training index") {
    // Points at -1 and +1 are equidistant from 0; the lower index wins.
    const data::Dataset ds = make((Matrix(2, 1) << 1, -1).finished(), (Vector(2) << -1, 1).finished());
    CHECK(predict_knn(ds, Matrix::Zero(1, 1), 1).labels(0) == -1.0);
}

TEST_CASE("mlp fits separable blobs") {
    const data::Dataset ds = data::make_blobs(80, 4, 4.0, 7);
    const MlpModel m = train_mlp(ds, 16, 60, 1e-2, 3);
    CHECK(accuracy(predict_mlp(m, ds.x).labels, ds.y) >= 0.99);
    REQUIRE(m.train_loss.size() >= 10);
    CHECK(m.train_loss[9] < m.train_loss[0]);
}

TEST_CASE("mlp softmax rows sum to one") {
    const data::Dataset ds = data::make_informative(40, 2, 3, 1.0, 8);
    const MlpModel m = train_mlp(ds, 8, 5, 1e-3, 1);
    const Matrix p = mlp_probabilities(m, ds.x);
    CHECK(p.cols() == 2);
    CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-6);
}

TEST_CASE("mlp is deterministic per seed") {
    const data::Dataset ds = data::make_informative(40, 2, 3, 1.0, 9);
    const MlpModel a = train_mlp(ds, 8, 10, 1e-3, 5);
    const MlpModel b = train_mlp(ds, 8, 10, 1e-3, 5);
    CHECK(a.w1 == b.w1);
    CHECK(a.w2 == b.w2);
    CHECK(train_mlp(ds, 8, 10, 1e-3, 6).w1 != a.w1);
}

TEST_CASE("property: mlp inference does not depend on batch size") {
    const data::Dataset ds = data::make_informative(40, 3, 3, 1.0, 10);
    const MlpModel m = train_mlp(ds, 8, 10, 1e-2, 2);
    const Matrix batch = mlp_probabilities(m, ds.x);
    for (Index i = 0; i < ds.n(); ++i) CHECK(mlp_probabilities(m, ds.x.row(i)) == batch.row(i));
}

TEST_CASE("mlp aborts on a non-finite loss") {
    const data::Dataset ds = data::make_informative(40, 2, 2, 1.0, 11);
    try {
        train_mlp(ds, 4, 20, 1e300, 1);
        FAIL("expected the diverging run to abort");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("loss") != std::string::npos);
    }
}

TEST_CASE("rvfl hidden weights are bounded and seeded") {
    const data::Dataset ds = data::make_informative(30, 3, 2, 1.0, 12);
    const RvflModel a = train_rvfl(ds, 23, 0, 0.5, 4);
    CHECK(a.w_in.cwiseAbs().maxCoeff() <= 0.5);
    CHECK(a.b_in.cwiseAbs().maxCoeff() <= 0.5);
    CHECK(a.beta.size() == 5 + 23);
    CHECK(train_rvfl(ds, 23, 0, 0.5, 4).beta == a.beta);
    CHECK(a.c_reg == 1.0);
}

TEST_CASE("rvfl without hidden units is ridge regression on the inputs") {
    const data::Dataset ds = data::make_informative(30, 3, 2, 1.0, 13);
    RvflOptions opt;
    opt.hidden = 10;
    opt.c_exp = -2;
    opt.zero_hidden = true;
    const RvflModel m = train_rvfl(ds, opt);
    Matrix a = ds.x.transpose() * ds.x;
    a.diagonal().array() += 0.25;
    const Vector ref = oracle::gauss_solve(a, Vector(ds.x.transpose() * ds.y));
    CHECK((m.beta - ref).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("rvfl output weights shrink under heavy regularization") {
    const data::Dataset ds = data::make_informative(30, 3, 2, 1.0, 14);
    double prev = std::numeric_limits<double>::infinity();
    for (int c : {0, 10, 20, 40}) {
        const double norm = train_rvfl(ds, 10, c, 1.0, 1).beta.norm();
        CHECK(norm < prev);
        prev = norm;
    }
    CHECK(prev <= 1e-8);
}

TEST_CASE("property: primal and dual ridge solutions agree") {
    Rng rng(15);
    for (Index cols : {Index{5}, Index{40}}) {
        const Matrix d = oracle::random_matrix(20, cols, rng);
        const Vector y = oracle::random_vector(20, rng);
        Matrix a = d.transpose() * d;
        a.diagonal().array() += 0.3;
        const Vector ref = oracle::gauss_solve(a, Vector(d.transpose() * y));
        CHECK((ridge_output_weights(d, y, 0.3) - ref).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("rvfl autoencoder without penalty is a least squares reconstruction") {
    const data::Dataset ds = data::make_informative(40, 3, 2, 1.0, 16);
    const RvflModel plain = train_rvfl(ds, 6, 0, 1.0, 7);
    const RvflModel ae = train_rvfl_ae(ds, 6, 0, 0.0, 7);
    CHECK(ae.pretrained);
    const Matrix h = rvfl_features(plain, ds.x).rightCols(6);
    const Matrix ref = oracle::gauss_solve(Matrix(h.transpose() * h), Matrix(h.transpose() * ds.x));
    CHECK((ae.w_in.transpose() - ref).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    CHECK(ae.b_in == plain.b_in);
}

TEST_CASE("rvfl autoencoder becomes sparse under a strong penalty") {
    const data::Dataset ds = data::make_informative(40, 3, 3, 1.0, 17);
    RvflOptions opt;
    opt.hidden = 10;
    opt.seed = 3;
    opt.autoencoder = true;
    opt.fista_iters = 20000;
    double crossed = -1;
    for (double l1 : {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0}) {
        opt.l1 = l1;
        const RvflModel m = train_rvfl(ds, opt);
        const double sparsity =
            static_cast<double>((m.w_in.array().abs() < 1e-8).count()) / static_cast<double>(m.w_in.size());
        if (sparsity >= 0.5) {
            crossed = l1;
            // the sparse decoder agrees with coordinate descent on the same objective
            const RvflModel plain = train_rvfl(ds, 10, 0, 1.0, 3);
            const Matrix h = rvfl_features(plain, ds.x).rightCols(10);
            Matrix cd(10, ds.d());
            for (Index j = 0; j < ds.d(); ++j) cd.col(j) = oracle::lasso_cd(h, ds.x.col(j), l1);
            const double f_fista = numkit::l1_ls_objective(h, ds.x, m.w_in.transpose(), l1);
            const double f_cd = numkit::l1_ls_objective(h, ds.x, cd, l1);
            CHECK(std::abs(f_fista - f_cd) <= 1e-5 * std::max(1.0, f_cd));
            break;
        }
    }
    CHECK(crossed > 0);
}

TEST_CASE("rvfl autoencoder predictions are deterministic per seed") {
    const data::Dataset ds = data::make_informative(30, 3, 2, 1.0, 18);
    const RvflModel a = train_rvfl_ae(ds, 8, 0, 1e-3, 2), b = train_rvfl_ae(ds, 8, 0, 1e-3, 2);
    CHECK(predict_rvfl(a, ds.x).scores == predict_rvfl(b, ds.x).scores);
}

TEST_CASE("property: every learner returns signed labels and finite scores") {
    const data::Dataset ds = data::make_informative(40, 3, 4, 1.0, 19);
    const std::vector<Prediction> preds = {
        predict_krr(train_krr(ds, 1.0, KernelSpec::gaussian(0.1)), ds.x),
        predict_knn(ds, ds.x, 5),
        predict_mlp(train_mlp(ds, 8, 5, 1e-3, 1), ds.x),
        predict_rvfl(train_rvfl(ds, 10, 0, 1.0, 1), ds.x),
        predict_rvfl(train_rvfl_ae(ds, 10, 0, 1e-3, 1), ds.x),
    };
    for (const Prediction& p : preds) {
        CHECK(labels_are_signs(p.labels));
        CHECK(p.scores.allFinite());
    }
}

TEST_CASE("sigmoid") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(800.0) <= 1.0);
}
