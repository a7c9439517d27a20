#pragma once

// Shallow learners: kernel ridge regression, k-nearest neighbours, a one
// hidden layer network with batch norm trained by Adam, and random vector
// functional link networks (plain and with an l1 autoencoder pretraining).

#include "twinbench/data.hpp"
#include "twinbench/kernels.hpp"
#include "twinbench/svmfam.hpp"

#include <cstdint>
#include <vector>

namespace twinbench::shallow {

using kernels::KernelSpec;
using svmfam::Prediction;

// ---- KRR ----

struct KrrModel {
    Vector coefficients;  // (K + lambda I)^-1 Y
    Matrix train_points;
    KernelSpec kernel;
    double lambda = 1.0;
    bool ridge_fallback = false;
};

KrrModel train_krr(const data::Dataset& ds, double lambda, const KernelSpec& k);
Vector krr_decision(const KrrModel& m, const Matrix& x);
/// label = sign of the decision value (0 maps to +1).
Prediction predict_krr(const KrrModel& m, const Matrix& x);

// ---- KNN ----

/// Majority vote of the k nearest training rows (Euclidean), distance ties
/// broken by training index. score = fraction of +1 neighbours.
Prediction predict_knn(const data::Dataset& train, const Matrix& x, int k = 5);

// ---- MLP ----

struct MlpOptions {
    Index hidden = 64;
    std::size_t epochs = 200;
    double lr = 1e-3;
    Index batch = 16;
    std::uint64_t seed = 0;
    double validation_fraction = 0.15;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;
};

struct AdamState {
    std::vector<Matrix> m, v;
    std::size_t step = 0;
};

/// FC -> BatchNorm -> ReLU -> FC -> softmax. Output column 1 is the patient class.
struct MlpModel {
    Matrix w1;  // d x h
    Vector b1;
    Vector gamma, beta;
    Vector running_mean, running_var;
    Matrix w2;  // h x 2
    Vector b2;
    double bn_eps = 1e-5;
    AdamState adam;
    std::vector<double> train_loss;       // mean batch loss per epoch
    std::vector<double> validation_loss;  // inference-mode loss per epoch
    std::size_t best_epoch = 0;
};

MlpModel train_mlp(const data::Dataset& ds, const MlpOptions& opt);
MlpModel train_mlp(const data::Dataset& ds, Index hidden, std::size_t epochs, double lr, std::uint64_t seed);

/// Inference-mode class probabilities (n x 2) using the frozen running statistics.
Matrix mlp_probabilities(const MlpModel& m, const Matrix& x);
Prediction predict_mlp(const MlpModel& m, const Matrix& x);

// ---- RVFL ----

struct RvflOptions {
    Index hidden = 100;         // N
    int c_exp = 0;              // lambda = 2^c_exp
    double scale = 1.0;         // S
    std::uint64_t seed = 0;
    bool autoencoder = false;
    double l1 = 1e-3;
    std::size_t fista_iters = 500;
    bool zero_hidden = false;   // test hook: drop the hidden block from D
};

struct RvflModel {
    Matrix w_in;  // d x N
    Vector b_in;
    double scale = 1.0;
    Vector beta;  // over the d + N columns of D
    double c_reg = 1.0;  // lambda
    std::uint64_t seed = 0;
    bool pretrained = false;
    bool zero_hidden = false;
    bool fista_converged = true;
};

RvflModel train_rvfl(const data::Dataset& ds, const RvflOptions& opt);
RvflModel train_rvfl(const data::Dataset& ds, Index n_hidden, int c_exp, double scale, std::uint64_t seed);
RvflModel train_rvfl_ae(const data::Dataset& ds, Index n_hidden, int c_exp, double l1, std::uint64_t seed);

/// D = [X | sigmoid(X W_in + b_in)].
Matrix rvfl_features(const RvflModel& m, const Matrix& x);
Prediction predict_rvfl(const RvflModel& m, const Matrix& x);

/// Ridge output weights: (D'D + lambda I)^-1 D'Y, computed through the
/// equivalent n x n system when D has more columns than rows.
Vector ridge_output_weights(const Matrix& d, const Vector& y, double lambda);

double sigmoid(double z);

}  // namespace twinbench::shallow
