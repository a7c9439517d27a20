#include "twinbench/svmfam.hpp"

#include <cmath>

namespace twinbench::svmfam {

namespace {

using numkit::kRidge;

void check_classes(const data::Dataset& ds) {
    require_dims(ds.y.size() == ds.x.rows(), "twin training: label count mismatch");
    if (ds.count(1.0) == 0 || ds.count(-1.0) == 0)
        throw InvalidArgument("twin training: both classes need at least one point");
}

std::vector<Index> class_rows(const data::Dataset& ds, double label) {
    std::vector<Index> rows;
    for (Index i = 0; i < ds.n(); ++i)
        if (ds.y(i) == label) rows.push_back(i);
    return rows;
}

Hyperplane split_plane(const Vector& u) {
    Hyperplane p;
    p.w = u.head(u.size() - 1);
    p.b = u(u.size() - 1);
    return p;
}

TwinClassifier base_model(const TwinDesign& design, const KernelSpec& k) {
    TwinClassifier m;
    m.kernel = k;
    m.reference = design.reference;
    return m;
}

// Solve both twin duals and recover the planes.
TwinClassifier fit_dual_pair(const data::Dataset& ds, const KernelSpec& k, double ridge1, double lo1, double hi1,
                             double ridge2, double lo2, double hi2) {
    check_classes(ds);
    const TwinDesign design = make_design(ds, k);
    TwinClassifier m = base_model(design, k);

    const TwinDual d1 = make_twin_dual(design.h, design.g, ridge1, lo1, hi1);
    const auto s1 = numkit::solve_box_qp(d1.problem);
    m.plane1 = split_plane(-(d1.recover * s1.x));

    const TwinDual d2 = make_twin_dual(design.g, design.h, ridge2, lo2, hi2);
    const auto s2 = numkit::solve_box_qp(d2.problem);
    m.plane2 = split_plane(d2.recover * s2.x);

    m.diagnostics.qp_converged = s1.converged && s2.converged;
    m.diagnostics.qp_iterations = s1.iterations + s2.iterations;
    m.diagnostics.ridge_fallback = d1.ridge_fallback || d2.ridge_fallback;
    m.diagnostics.dual1 = s1.x;
    m.diagnostics.dual2 = s2.x;
    return m;
}

Matrix gram_plus_ridge(const Matrix& a, double ridge) {
    Matrix out = a.transpose() * a;
    out.diagonal().array() += ridge;
    return out;
}

}  // namespace

TwinDesign make_design(const data::Dataset& ds, const KernelSpec& k) {
    const auto pos = class_rows(ds, 1.0);
    const auto neg = class_rows(ds, -1.0);
    const Matrix x1 = take_rows(ds.x, pos);
    const Matrix x2 = take_rows(ds.x, neg);
    TwinDesign d;
    if (k.is_linear()) {
        d.h = augment_ones(x1);
        d.g = augment_ones(x2);
    } else {
        d.reference = ds.x;
        d.h = augment_ones(kernels::gram(x1, ds.x, k));
        d.g = augment_ones(kernels::gram(x2, ds.x, k));
    }
    return d;
}

TwinDual make_twin_dual(const Matrix& own, const Matrix& other, double ridge, double lower, double upper) {
    require_dims(own.cols() == other.cols(), "make_twin_dual: block widths differ");
    const auto solved = numkit::solve_spd(gram_plus_ridge(own, ridge), Matrix(other.transpose()));
    TwinDual d;
    d.recover = solved.x;
    d.ridge_fallback = solved.ridge_fallback;
    Matrix mm = other * solved.x;
    mm = 0.5 * (mm + mm.transpose());
    d.problem = numkit::BoxQp::uniform(std::move(mm), Vector::Ones(other.rows()), lower, upper);
    return d;
}

TwinClassifier train_twsvm(const data::Dataset& ds, double c1, double c2, const KernelSpec& k) {
    require(c1 > 0.0 && c2 > 0.0, "train_twsvm: penalties must be positive");
    TwinClassifier m = fit_dual_pair(ds, k, kRidge, 0.0, c1, kRidge, 0.0, c2);
    m.hyper.c1 = c1;
    m.hyper.c2 = c2;
    return m;
}

TwinClassifier train_tbsvm(const data::Dataset& ds, double c1, double c2, double c3, double c4, const KernelSpec& k) {
    require(c1 > 0.0 && c3 > 0.0, "train_tbsvm: c1 and c3 must be positive");
    require(c2 >= 0.0 && c4 >= 0.0, "train_tbsvm: c2 and c4 must be non-negative");
    const double r1 = c2 > 0.0 ? c2 : kRidge;
    const double r2 = c4 > 0.0 ? c4 : kRidge;
    TwinClassifier m = fit_dual_pair(ds, k, r1, 0.0, c1, r2, 0.0, c3);
    m.hyper.c1 = c1;
    m.hyper.c2 = c2;
    m.hyper.c3 = c3;
    m.hyper.c4 = c4;
    return m;
}

TwinClassifier train_lstsvm(const data::Dataset& ds, double c1, double c2, const KernelSpec& k) {
    require(c1 > 0.0 && c2 > 0.0, "train_lstsvm: penalties must be positive");
    check_classes(ds);
    const TwinDesign design = make_design(ds, k);
    TwinClassifier m = base_model(design, k);
    const Matrix hth = design.h.transpose() * design.h;
    const Matrix gtg = design.g.transpose() * design.g;

    Matrix a1 = gtg + hth / c1;
    a1.diagonal().array() += kRidge;
    const auto s1 = numkit::solve_spd(a1, Vector(-(design.g.transpose() * Vector::Ones(design.g.rows()))));

    Matrix a2 = hth + gtg / c2;
    a2.diagonal().array() += kRidge;
    const auto s2 = numkit::solve_spd(a2, Vector(design.h.transpose() * Vector::Ones(design.h.rows())));

    m.plane1 = split_plane(s1.x);
    m.plane2 = split_plane(s2.x);
    m.diagnostics.ridge_fallback = s1.ridge_fallback || s2.ridge_fallback;
    m.hyper.c1 = c1;
    m.hyper.c2 = c2;
    return m;
}

TwinClassifier train_relstsvm(const data::Dataset& ds, double c1, double c2, double c3, double c4, const Vector& e1,
                              const Vector& e2, const KernelSpec& k) {
    require(c1 > 0.0 && c3 > 0.0, "train_relstsvm: c1 and c3 must be positive");
    require(c2 >= 0.0 && c4 >= 0.0, "train_relstsvm: c2 and c4 must be non-negative");
    check_classes(ds);
    const TwinDesign design = make_design(ds, k);
    require_dims(e1.size() == design.g.rows(), "train_relstsvm: E1 length must equal the class -1 count");
    require_dims(e2.size() == design.h.rows(), "train_relstsvm: E2 length must equal the class +1 count");
    for (Index i = 0; i < e1.size(); ++i) require(e1(i) > 0.0 && e1(i) <= 1.0, "train_relstsvm: E1 outside (0, 1]");
    for (Index i = 0; i < e2.size(); ++i) require(e2(i) > 0.0 && e2(i) <= 1.0, "train_relstsvm: E2 outside (0, 1]");

    TwinClassifier m = base_model(design, k);
    const Matrix& p = design.h;
    const Matrix& q = design.g;
    const Matrix ptp = p.transpose() * p;
    const Matrix qtq = q.transpose() * q;

    // A zero Tikhonov term falls back to the same relative ridge LSTSVM uses,
    // so E = 1, c2 = c4 = 0 reproduces LSTSVM exactly up to scaling.
    Matrix a1 = c1 * qtq + ptp;
    a1.diagonal().array() += c2 > 0.0 ? c2 : c1 * kRidge;
    const auto s1 = numkit::solve_spd(a1, Vector(-c1 * (q.transpose() * e1)));

    Matrix a2 = c3 * ptp + qtq;
    a2.diagonal().array() += c4 > 0.0 ? c4 : c3 * kRidge;
    const auto s2 = numkit::solve_spd(a2, Vector(c3 * (p.transpose() * e2)));

    m.plane1 = split_plane(s1.x);
    m.plane2 = split_plane(s2.x);
    m.diagnostics.ridge_fallback = s1.ridge_fallback || s2.ridge_fallback;
    m.hyper.c1 = c1;
    m.hyper.c2 = c2;
    m.hyper.c3 = c3;
    m.hyper.c4 = c4;
    m.hyper.e1 = e1;
    m.hyper.e2 = e2;
    return m;
}

TwinClassifier train_relstsvm(const data::Dataset& ds, double c1, double c2, double c3, double c4, double e1,
                              double e2, const KernelSpec& k) {
    check_classes(ds);
    return train_relstsvm(ds, c1, c2, c3, c4, Vector::Constant(ds.count(-1.0), e1), Vector::Constant(ds.count(1.0), e2),
                          k);
}

TwinClassifier train_pingtsvm(const data::Dataset& ds, double c1, double c2, double tau1, double tau2,
                              const KernelSpec& k) {
    require(c1 > 0.0 && c2 > 0.0, "train_pingtsvm: penalties must be positive");
    require(tau1 >= 0.0 && tau1 <= 1.0 && tau2 >= 0.0 && tau2 <= 1.0, "train_pingtsvm: tau outside [0, 1]");
    // s = alpha - beta with alpha + beta / tau = c e, alpha, beta >= 0  =>  -tau c <= s <= c.
    TwinClassifier m = fit_dual_pair(ds, k, kRidge, -tau2 * c1, c1, kRidge, -tau1 * c2, c2);
    m.hyper.c1 = c1;
    m.hyper.c2 = c2;
    m.hyper.tau1 = tau1;
    m.hyper.tau2 = tau2;
    return m;
}

Matrix plane_values(const TwinClassifier& m, const Matrix& x) {
    Matrix feats;
    if (m.kernelized()) {
        require_dims(x.cols() == m.reference.cols(), "predict_twin: feature count mismatch");
        feats = kernels::gram(x, m.reference, m.kernel);
    } else {
        require_dims(x.cols() == m.plane1.w.size(), "predict_twin: feature count mismatch");
        feats = x;
    }
    Matrix out(x.rows(), 2);
    out.col(0) = (feats * m.plane1.w).array() + m.plane1.b;
    out.col(1) = (feats * m.plane2.w).array() + m.plane2.b;
    return out;
}

Prediction predict_twin(const TwinClassifier& m, const Matrix& x) {
    const Matrix f = plane_values(m, x);
    double n1 = 1.0, n2 = 1.0;
    if (m.normalize) {
        n1 = std::max(m.plane1.w.norm(), 1e-300);
        n2 = std::max(m.plane2.w.norm(), 1e-300);
    }
    Prediction p;
    p.labels.resize(x.rows());
    p.scores.resize(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        const double d1 = std::abs(f(i, 0)) / n1;
        const double d2 = std::abs(f(i, 1)) / n2;
        p.labels(i) = d1 <= d2 ? 1.0 : -1.0;
        p.scores(i) = d2 - d1;
    }
    return p;
}

SvmClassifier train_svm(const data::Dataset& ds, double c, const KernelSpec& k) {
    require(c > 0.0, "train_svm: C must be positive");
    check_classes(ds);
    const Matrix kern = kernels::gram(ds.x, ds.x, k).array() + 1.0;
    Matrix qm = (ds.y * ds.y.transpose()).cwiseProduct(kern);
    qm = 0.5 * (qm + qm.transpose());
    const auto sol = numkit::solve_box_qp(numkit::BoxQp::uniform(std::move(qm), Vector::Ones(ds.n()), 0.0, c));

    SvmClassifier m;
    m.kernel = k;
    m.c = c;
    m.converged = sol.converged;
    std::vector<Index> keep;
    for (Index i = 0; i < ds.n(); ++i)
        if (sol.x(i) > 0.0) keep.push_back(i);
    m.alpha = take(sol.x, keep);
    m.points = take_rows(ds.x, keep);
    m.labels = take(ds.y, keep);
    if (keep.empty()) m.points.resize(0, ds.d());
    return m;
}

Vector svm_decision(const SvmClassifier& m, const Matrix& x) {
    require_dims(x.cols() == m.points.cols(), "predict_svm: feature count mismatch");
    if (m.alpha.size() == 0) return Vector::Zero(x.rows());
    const Matrix kern = kernels::gram(x, m.points, m.kernel).array() + 1.0;
    return kern * m.alpha.cwiseProduct(m.labels);
}

Prediction predict_svm(const SvmClassifier& m, const Matrix& x) {
    Prediction p;
    p.scores = svm_decision(m, x);
    p.labels = p.scores.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
    return p;
}

}  // namespace twinbench::svmfam
