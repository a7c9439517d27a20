#pragma once

// Random forests with axis-parallel and oblique splits.
//
// Every tree grows on a bootstrap sample, draws floor(sqrt(d)) candidate
// features per node and keeps the split with the largest Gini gain. The
// variants differ only in which split learners they run at a node.

#include "twinbench/data.hpp"
#include "twinbench/rng.hpp"
#include "twinbench/svmfam.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace twinbench::forests {

enum class Variant { RaF, MPRaF_T, MPRaF_P, MPRaF_N, Het, RaF_LDA, RaF_PCA };

std::string to_string(Variant v);

struct SplitRule {
    enum class Kind { Axis, Oblique };
    Kind kind = Kind::Axis;
    // Axis: x[feature] < threshold goes left.
    Index feature = 0;
    double threshold = 0.0;
    // Oblique: weights . x[features] + bias < 0 goes left.
    std::vector<Index> features;
    Vector weights;
    double bias = 0.0;

    bool goes_left(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

struct TreeNode {
    bool leaf = true;
    double p_pos = 0.5;  // leaf: p(y = +1 | x)
    SplitRule rule;
    int left = -1;
    int right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    double oob_fraction = 0.0;

    double predict_pos(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
    int depth() const;
};

struct Forest {
    std::vector<Tree> trees;
    int n_trees = 0;
    Variant variant = Variant::RaF;
    std::uint64_t seed = 0;
    Index n_features = 0;
};

struct ForestOptions {
    int max_depth = 30;
    Index min_samples = 3;
    double tikhonov = 0.01;          // MPRaF-T ridge
    double condition_limit = 1e12;   // MPRaF-P falls back above this
    double null_eigen_tol = 1e-10;   // MPRaF-N null-space cut (relative to the largest eigenvalue)
    std::size_t svm_max_iter = 500;  // Het SVM learner
};

/// Per-node record used to audit split selection.
struct SplitTrace {
    std::string learner;
    double accepted_gain = 0.0;
    double best_axis_gain = 0.0;
    bool fallback = false;
};

Forest train_forest(const data::Dataset& ds, Variant variant, int n_trees, std::uint64_t seed,
                    const ForestOptions& opt = {}, std::vector<SplitTrace>* trace = nullptr);

/// score = mean over trees of p_t(+1 | x); label +1 iff score >= 0.5.
svmfam::Prediction predict_forest(const Forest& f, const Matrix& x);

// ---- node-level building blocks ----

double gini(double n_pos, double n_total);

/// Node samples: rows of the feature matrix (may repeat) and their labels.
struct NodeData {
    Matrix x;  // n_node x k, candidate features only
    Vector y;
    std::vector<Index> features;  // original column of each x column
};

struct Candidate {
    SplitRule rule;
    double gain = 0.0;
    bool valid = false;
    std::string learner;
};

/// Gini gain of routing each sample left (true) or right.
double split_gain(const Vector& y, const std::vector<bool>& left);

Candidate best_axis_split(const NodeData& node);

/// Best threshold along an arbitrary direction (weights over node.features).
Candidate best_direction_split(const NodeData& node, const Vector& direction, const std::string& learner);

/// Hyperplane w.x + b with w over node.features, scored by Gini.
Candidate hyperplane_split(const NodeData& node, const Vector& w, double b, const std::string& learner);

enum class MpsvmRegularization { Tikhonov, AxisFallback, NullSpace };

struct MpsvmPlanes {
    Vector u1, u2;  // [w; b] for the class +1 and class -1 proximal planes
    bool ok = false;
    std::string reason;
};

/// The two MPSVM proximal planes of a node under one regularization.
/// AxisFallback returns ok == false when either eigenproblem is ill-posed.
MpsvmPlanes mpsvm_planes(const NodeData& node, MpsvmRegularization reg, const ForestOptions& opt);

/// Best of the two angle bisectors of the proximal planes, thresholded at 0.
Candidate mpsvm_split(const NodeData& node, MpsvmRegularization reg, const ForestOptions& opt);

Vector lda_direction(const NodeData& node, double* bias = nullptr);
Vector pca_direction(const NodeData& node);

/// Linear learners used by the heterogeneous forest, each giving (w, b).
struct LinearModel {
    Vector w;
    double b = 0.0;
};
LinearModel fit_svm_split(const NodeData& node, std::size_t max_iter);
LinearModel fit_lssvm_split(const NodeData& node, double gamma = 1.0);
LinearModel fit_ridge_split(const NodeData& node, double lambda = 1.0);
LinearModel fit_logistic_split(const NodeData& node, int irls_steps = 10);

/// min over cluster pairs of the minimum inter-point distance, divided by the
/// largest cluster diameter. Larger means better separated.
double cluster_separation(const std::vector<Matrix>& clusters);

/// Groups classes into two hyper-classes maximizing cluster_separation.
/// Returns the hyper-class (0 / 1) of each distinct class id in ascending id order.
std::vector<int> hyperclass_partition(const Matrix& x, const std::vector<int>& class_ids);

std::vector<Index> bootstrap_sample(Index n, Rng& rng);

}  // namespace twinbench::forests
