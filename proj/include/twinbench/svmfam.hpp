#pragma once

// SVM and the twin-SVM family (TWSVM, TBSVM, LSTSVM, RELSTSVM, Pin-GTSVM).
//
// Class 1 is always the patient class (+1). Twin models fit plane 1 close to
// class 1 and plane 2 close to class -1; with a Gaussian kernel both planes
// live in the span of K(., C) where C stacks all training points.

#include "twinbench/data.hpp"
#include "twinbench/kernels.hpp"
#include "twinbench/numkit.hpp"

namespace twinbench::svmfam {

using kernels::KernelSpec;

struct Hyperplane {
    Vector w;
    double b = 0.0;
};

struct TwinHyper {
    double c1 = 1.0, c2 = 1.0, c3 = 0.0, c4 = 0.0;
    Vector e1, e2;  // RELSTSVM energies
    double tau1 = 0.0, tau2 = 0.0;
};

struct TwinDiagnostics {
    bool qp_converged = true;
    bool ridge_fallback = false;
    std::size_t qp_iterations = 0;
    Vector dual1, dual2;  // empty for the closed-form models
};

struct TwinClassifier {
    Hyperplane plane1, plane2;
    KernelSpec kernel;
    Matrix reference;  // training stack for kernel models, empty for linear
    TwinHyper hyper;
    bool normalize = false;  // divide distances by ||w_i||
    TwinDiagnostics diagnostics;

    bool kernelized() const { return reference.size() > 0; }
};

struct Prediction {
    Vector labels;  // +1 / -1
    Vector scores;  // larger means more patient-like
};

/// Augmented design blocks: own = [K(X1, C) e] or [X1 e], other likewise for class -1.
struct TwinDesign {
    Matrix h;  // class +1
    Matrix g;  // class -1
    Matrix reference;
};
TwinDesign make_design(const data::Dataset& ds, const KernelSpec& k);

/// Dual of one twin plane: min 1/2 s'Ms - e's over [lower, upper] with
/// M = other (own'own + ridge I)^-1 other'. The plane is u = sign * recover * s.
struct TwinDual {
    numkit::BoxQp problem;
    Matrix recover;
    bool ridge_fallback = false;
};
TwinDual make_twin_dual(const Matrix& own, const Matrix& other, double ridge, double lower, double upper);

TwinClassifier train_twsvm(const data::Dataset& ds, double c1, double c2, const KernelSpec& k);
TwinClassifier train_tbsvm(const data::Dataset& ds, double c1, double c2, double c3, double c4, const KernelSpec& k);
TwinClassifier train_lstsvm(const data::Dataset& ds, double c1, double c2, const KernelSpec& k);
TwinClassifier train_relstsvm(const data::Dataset& ds, double c1, double c2, double c3, double c4, const Vector& e1,
                              const Vector& e2, const KernelSpec& k);
/// Scalar energies broadcast to constant vectors.
TwinClassifier train_relstsvm(const data::Dataset& ds, double c1, double c2, double c3, double c4, double e1, double e2,
                              const KernelSpec& k);
TwinClassifier train_pingtsvm(const data::Dataset& ds, double c1, double c2, double tau1, double tau2,
                              const KernelSpec& k);

/// Raw plane values f_i(x) = w_i'x + b_i (or K(x, C) w_i + b_i), one column per plane.
Matrix plane_values(const TwinClassifier& m, const Matrix& x);

/// +1 when |f1| <= |f2|, else -1; score = |f2| - |f1|.
Prediction predict_twin(const TwinClassifier& m, const Matrix& x);

struct SvmClassifier {
    Vector alpha;   // dual coefficients of the retained points
    Matrix points;  // retained training rows
    Vector labels;
    KernelSpec kernel;
    double c = 1.0;
    bool converged = true;
};

/// Bias-absorbed dual: kernel K + 1, 0 <= alpha <= C, no equality constraint.
SvmClassifier train_svm(const data::Dataset& ds, double c, const KernelSpec& k);
Vector svm_decision(const SvmClassifier& m, const Matrix& x);
Prediction predict_svm(const SvmClassifier& m, const Matrix& x);

}  // namespace twinbench::svmfam
