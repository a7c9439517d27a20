#include "twinbench/forests.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace twinbench::forests {

namespace {

constexpr double kMinGain = 1e-12;

struct Threshold {
    double value = 0.0;
    double gain = 0.0;
    bool valid = false;
};

// Best "v < t goes left" threshold over one projected coordinate.
Threshold best_threshold(const Vector& v, const Vector& y) {
    const Index n = v.size();
    Threshold best;
    if (n < 2) return best;
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) < v(b); });

    double total_pos = 0.0;
    for (Index i = 0; i < n; ++i) total_pos += y(i) > 0 ? 1.0 : 0.0;
    const double parent = gini(total_pos, static_cast<double>(n));

    double left_pos = 0.0;
    for (Index r = 0; r + 1 < n; ++r) {
        const Index i = order[static_cast<std::size_t>(r)];
        left_pos += y(i) > 0 ? 1.0 : 0.0;
        const double lo = v(i);
        const double hi = v(order[static_cast<std::size_t>(r + 1)]);
        if (!(hi > lo)) continue;
        const double nl = static_cast<double>(r + 1);
        const double nr = static_cast<double>(n) - nl;
        const double gain = parent - (nl / n) * gini(left_pos, nl) - (nr / n) * gini(total_pos - left_pos, nr);
        if (!best.valid || gain > best.gain) {
            double mid = 0.5 * (lo + hi);
            if (!(mid > lo)) mid = hi;  // adjacent doubles
            best = {mid, gain, true};
        }
    }
    return best;
}

std::vector<Index> rows_with_label(const Vector& y, double label) {
    std::vector<Index> out;
    for (Index i = 0; i < y.size(); ++i)
        if (y(i) == label) out.push_back(i);
    return out;
}

bool finite_nonzero(const Vector& w) { return w.allFinite() && w.cwiseAbs().maxCoeff() > 0.0; }

// Plane that maximizes the other-class quotient inside the own-class null space.
// Returns an empty vector when the null space is trivial.
Vector null_space_plane(const Matrix& own, const Matrix& other, double tol) {
    const numkit::SymEigen eig = numkit::jacobi_eigen(own);
    const double cut = tol * std::max(1.0, eig.values.cwiseAbs().maxCoeff());
    std::vector<Index> cols;
    for (Index i = 0; i < eig.values.size(); ++i)
        if (eig.values(i) < cut) cols.push_back(i);
    if (cols.empty()) return {};
    Matrix z(own.rows(), static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) z.col(static_cast<Index>(j)) = eig.vectors.col(cols[j]);
    const Matrix m = z.transpose() * other * z;
    const numkit::SymEigen inner = numkit::jacobi_eigen(0.5 * (m + m.transpose()));
    Vector v = z * inner.vectors.col(inner.values.size() - 1);
    return v / v.norm();
}

struct Builder {
    const Matrix& x;
    const Vector& y;
    Variant variant;
    const ForestOptions& opt;
    Rng& rng;
    std::vector<SplitTrace>* trace;
    Tree tree;

    NodeData node_data(const std::vector<Index>& rows, const std::vector<Index>& features) const {
        NodeData nd;
        nd.features = features;
        nd.x.resize(static_cast<Index>(rows.size()), static_cast<Index>(features.size()));
        nd.y.resize(static_cast<Index>(rows.size()));
        for (std::size_t r = 0; r < rows.size(); ++r) {
            for (std::size_t c = 0; c < features.size(); ++c)
                nd.x(static_cast<Index>(r), static_cast<Index>(c)) = x(rows[r], features[c]);
            nd.y(static_cast<Index>(r)) = y(rows[r]);
        }
        return nd;
    }

    std::vector<Index> candidate_features() {
        const Index d = x.cols();
        const Index k = std::max<Index>(1, static_cast<Index>(std::floor(std::sqrt(static_cast<double>(d)))));
        std::vector<Index> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), Index{0});
        for (Index i = 0; i < k; ++i) {
            const auto j = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(d - i))) + i;
            std::swap(all[static_cast<std::size_t>(i)], all[static_cast<std::size_t>(j)]);
        }
        all.resize(static_cast<std::size_t>(k));
        std::sort(all.begin(), all.end());
        return all;
    }

    Candidate choose(const NodeData& nd) {
        Candidate axis = best_axis_split(nd);
        Candidate chosen;
        bool fallback = false;
        switch (variant) {
            case Variant::RaF:
                chosen = axis;
                break;
            case Variant::MPRaF_T:
            case Variant::MPRaF_P:
            case Variant::MPRaF_N: {
                const auto reg = variant == Variant::MPRaF_T   ? MpsvmRegularization::Tikhonov
                                 : variant == Variant::MPRaF_P ? MpsvmRegularization::AxisFallback
                                                               : MpsvmRegularization::NullSpace;
                chosen = mpsvm_split(nd, reg, opt);
                if (!chosen.valid || chosen.gain <= kMinGain) {
                    chosen = axis;
                    fallback = true;
                }
                break;
            }
            case Variant::RaF_LDA:
            case Variant::RaF_PCA: {
                const Vector dir = variant == Variant::RaF_LDA ? lda_direction(nd) : pca_direction(nd);
                chosen = best_direction_split(nd, dir, variant == Variant::RaF_LDA ? "lda" : "pca");
                if (!chosen.valid || chosen.gain <= kMinGain) {
                    chosen = axis;
                    fallback = true;
                }
                break;
            }
            case Variant::Het: {
                std::vector<Candidate> pool;
                pool.push_back(axis);
                auto add_linear = [&](const char* name, auto&& fit) {
                    try {
                        const LinearModel lm = fit();
                        pool.push_back(hyperplane_split(nd, lm.w, lm.b, name));
                    } catch (const Error&) {
                        // a learner that cannot be fit at this node simply drops out
                    }
                };
                add_linear("svm", [&] { return fit_svm_split(nd, opt.svm_max_iter); });
                pool.push_back(mpsvm_split(nd, MpsvmRegularization::Tikhonov, opt));
                add_linear("lda", [&] {
                    LinearModel lm;
                    lm.w = lda_direction(nd, &lm.b);
                    return lm;
                });
                add_linear("lssvm", [&] { return fit_lssvm_split(nd); });
                add_linear("ridge", [&] { return fit_ridge_split(nd); });
                add_linear("logistic", [&] { return fit_logistic_split(nd); });
                for (const Candidate& c : pool)
                    if (c.valid && (!chosen.valid || c.gain > chosen.gain)) chosen = c;
                break;
            }
        }
        if (trace) trace->push_back({chosen.learner, chosen.valid ? chosen.gain : 0.0, axis.valid ? axis.gain : 0.0,
                                     fallback});
        return chosen;
    }

    int grow(const std::vector<Index>& rows, int depth) {
        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        double pos = 0.0;
        for (Index r : rows) pos += y(r) > 0 ? 1.0 : 0.0;
        const double n = static_cast<double>(rows.size());
        tree.nodes[static_cast<std::size_t>(id)].p_pos = pos / n;
        if (pos == 0.0 || pos == n || depth >= opt.max_depth || static_cast<Index>(rows.size()) < opt.min_samples)
            return id;

        Candidate c = choose(node_data(rows, candidate_features()));
        if (!c.valid || c.gain <= kMinGain) {
            // The drawn features cannot separate this node; widen the search before giving up.
            std::vector<Index> all(static_cast<std::size_t>(x.cols()));
            std::iota(all.begin(), all.end(), Index{0});
            c = best_axis_split(node_data(rows, all));
            if (!c.valid || c.gain <= kMinGain) return id;
        }

        std::vector<Index> left, right;
        for (Index r : rows) (c.rule.goes_left(x.row(r)) ? left : right).push_back(r);
        if (left.empty() || right.empty()) return id;

        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
        node.leaf = false;
        node.rule = c.rule;
        node.left = l;
        node.right = r;
        return id;
    }
};

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::RaF: return "RaF";
        case Variant::MPRaF_T: return "MPRaF-T";
        case Variant::MPRaF_P: return "MPRaF-P";
        case Variant::MPRaF_N: return "MPRaF-N";
        case Variant::Het: return "Het-RaF";
        case Variant::RaF_LDA: return "RaF-LDA";
        case Variant::RaF_PCA: return "RaF-PCA";
    }
    return "?";
}

bool SplitRule::goes_left(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    if (kind == Kind::Axis) return x(feature) < threshold;
    double s = bias;
    for (std::size_t j = 0; j < features.size(); ++j) s += weights(static_cast<Index>(j)) * x(features[j]);
    return s < 0.0;
}

double Tree::predict_pos(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    std::size_t i = 0;
    while (!nodes[i].leaf) i = static_cast<std::size_t>(nodes[i].rule.goes_left(x) ? nodes[i].left : nodes[i].right);
    return nodes[i].p_pos;
}

int Tree::depth() const {
    std::vector<int> level(nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, level[i]);
        if (!nodes[i].leaf) {
            level[static_cast<std::size_t>(nodes[i].left)] = level[i] + 1;
            level[static_cast<std::size_t>(nodes[i].right)] = level[i] + 1;
        }
    }
    return deepest;
}

double gini(double n_pos, double n_total) {
    if (n_total <= 0.0) return 0.0;
    const double p = n_pos / n_total;
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

double split_gain(const Vector& y, const std::vector<bool>& left) {
    require_dims(static_cast<Index>(left.size()) == y.size(), "split_gain: mask length mismatch");
    double nl = 0, pl = 0, nr = 0, pr = 0;
    for (Index i = 0; i < y.size(); ++i) {
        const double pos = y(i) > 0 ? 1.0 : 0.0;
        if (left[static_cast<std::size_t>(i)]) {
            nl += 1;
            pl += pos;
        } else {
            nr += 1;
            pr += pos;
        }
    }
    const double n = nl + nr;
    if (n == 0) return 0.0;
    return gini(pl + pr, n) - (nl / n) * gini(pl, nl) - (nr / n) * gini(pr, nr);
}

Candidate best_axis_split(const NodeData& node) {
    Candidate best;
    best.learner = "axis";
    for (Index j = 0; j < node.x.cols(); ++j) {
        const Threshold t = best_threshold(node.x.col(j), node.y);
        if (t.valid && (!best.valid || t.gain > best.gain)) {
            best.valid = true;
            best.gain = t.gain;
            best.rule = SplitRule{};
            best.rule.kind = SplitRule::Kind::Axis;
            best.rule.feature = node.features[static_cast<std::size_t>(j)];
            best.rule.threshold = t.value;
        }
    }
    return best;
}

Candidate best_direction_split(const NodeData& node, const Vector& direction, const std::string& learner) {
    Candidate c;
    c.learner = learner;
    if (direction.size() != node.x.cols() || !finite_nonzero(direction)) return c;
    const Threshold t = best_threshold(node.x * direction, node.y);
    if (!t.valid) return c;
    c.valid = true;
    c.gain = t.gain;
    c.rule.kind = SplitRule::Kind::Oblique;
    c.rule.features = node.features;
    c.rule.weights = direction;
    c.rule.bias = -t.value;
    return c;
}

Candidate hyperplane_split(const NodeData& node, const Vector& w, double b, const std::string& learner) {
    Candidate c;
    c.learner = learner;
    if (w.size() != node.x.cols() || !finite_nonzero(w) || !std::isfinite(b)) return c;
    const Vector s = node.x * w;
    std::vector<bool> left(static_cast<std::size_t>(s.size()));
    bool any_left = false, any_right = false;
    for (Index i = 0; i < s.size(); ++i) {
        left[static_cast<std::size_t>(i)] = s(i) + b < 0.0;
        (left[static_cast<std::size_t>(i)] ? any_left : any_right) = true;
    }
    if (!any_left || !any_right) return c;
    c.valid = true;
    c.gain = split_gain(node.y, left);
    c.rule.kind = SplitRule::Kind::Oblique;
    c.rule.features = node.features;
    c.rule.weights = w;
    c.rule.bias = b;
    return c;
}

MpsvmPlanes mpsvm_planes(const NodeData& node, MpsvmRegularization reg, const ForestOptions& opt) {
    MpsvmPlanes out;
    const Matrix h = augment_ones(take_rows(node.x, rows_with_label(node.y, 1.0)));
    const Matrix g = augment_ones(take_rows(node.x, rows_with_label(node.y, -1.0)));
    if (h.rows() == 0 || g.rows() == 0) {
        out.reason = "single-class node";
        return out;
    }
    const Matrix a = h.transpose() * h;
    const Matrix b = g.transpose() * g;

    auto tikhonov = [&](const Matrix& own, const Matrix& other) {
        return numkit::min_gen_eigenpair(own, other, opt.tikhonov).vector;
    };

    try {
        switch (reg) {
            case MpsvmRegularization::Tikhonov:
                out.u1 = tikhonov(a, b);
                out.u2 = tikhonov(b, a);
                break;
            case MpsvmRegularization::AxisFallback: {
                const numkit::GenEigenpair p1 = numkit::min_gen_eigenpair(a, b, 0.0);
                const numkit::GenEigenpair p2 = numkit::min_gen_eigenpair(b, a, 0.0);
                if (!(p1.condition <= opt.condition_limit) || !(p2.condition <= opt.condition_limit)) {
                    out.reason = "ill-conditioned";
                    return out;
                }
                out.u1 = p1.vector;
                out.u2 = p2.vector;
                break;
            }
            case MpsvmRegularization::NullSpace:
                out.u1 = null_space_plane(a, b, opt.null_eigen_tol);
                if (out.u1.size() == 0) out.u1 = tikhonov(a, b);
                out.u2 = null_space_plane(b, a, opt.null_eigen_tol);
                if (out.u2.size() == 0) out.u2 = tikhonov(b, a);
                break;
        }
    } catch (const InvalidArgument&) {
        out.reason = "not positive definite";
        return out;
    }
    out.ok = out.u1.allFinite() && out.u2.allFinite();
    if (!out.ok) out.reason = "non-finite plane";
    return out;
}

Candidate mpsvm_split(const NodeData& node, MpsvmRegularization reg, const ForestOptions& opt) {
    Candidate best;
    best.learner = "mpsvm";
    const MpsvmPlanes planes = mpsvm_planes(node, reg, opt);
    if (!planes.ok) return best;
    const Index k = node.x.cols();
    const double n1 = planes.u1.head(k).norm();
    const double n2 = planes.u2.head(k).norm();
    if (!(n1 > 1e-12) || !(n2 > 1e-12)) return best;
    const Vector v1 = planes.u1 / n1;
    const Vector v2 = planes.u2 / n2;
    for (const Vector& bis : {Vector(v1 + v2), Vector(v1 - v2)}) {
        const Candidate c = hyperplane_split(node, bis.head(k), bis(k), "mpsvm");
        if (c.valid && (!best.valid || c.gain > best.gain)) best = c;
    }
    return best;
}

Vector lda_direction(const NodeData& node, double* bias) {
    const Matrix x1 = take_rows(node.x, rows_with_label(node.y, 1.0));
    const Matrix x2 = take_rows(node.x, rows_with_label(node.y, -1.0));
    require(x1.rows() > 0 && x2.rows() > 0, "lda_direction: both classes required");
    const Vector mu1 = x1.colwise().mean().transpose();
    const Vector mu2 = x2.colwise().mean().transpose();
    const Matrix c1 = x1.rowwise() - mu1.transpose();
    const Matrix c2 = x2.rowwise() - mu2.transpose();
    Matrix sw = c1.transpose() * c1 + c2.transpose() * c2;
    const double scale = sw.trace() / static_cast<double>(sw.rows());
    sw.diagonal().array() += 1e-6 * std::max(scale, 1.0);
    const Vector w = numkit::solve_spd(sw, Vector(mu1 - mu2)).x;
    if (bias) *bias = -0.5 * w.dot(mu1 + mu2);
    return w;
}

Vector pca_direction(const NodeData& node) {
    const Matrix c = node.x.rowwise() - node.x.colwise().mean();
    const numkit::SymEigen eig = numkit::jacobi_eigen(c.transpose() * c);
    return eig.vectors.col(eig.values.size() - 1);
}

LinearModel fit_svm_split(const NodeData& node, std::size_t max_iter) {
    const Matrix gram = (node.x * node.x.transpose()).array() + 1.0;
    const Matrix q = (node.y * node.y.transpose()).cwiseProduct(gram);
    const numkit::BoxQp p = numkit::BoxQp::uniform(q, Vector::Ones(node.y.size()), 0.0, 1.0);
    const numkit::QpSolution s = numkit::solve_box_qp(p, numkit::kDefaultTol, max_iter);
    const Vector ay = s.x.cwiseProduct(node.y);
    return {node.x.transpose() * ay, ay.sum()};
}

LinearModel fit_lssvm_split(const NodeData& node, double gamma) {
    const Matrix z = augment_ones(node.x);
    Matrix a = z.transpose() * z;
    a.diagonal().head(node.x.cols()).array() += 1.0 / gamma;
    const Vector u = numkit::solve_spd(a, Vector(z.transpose() * node.y)).x;
    return {u.head(node.x.cols()), u(node.x.cols())};
}

LinearModel fit_ridge_split(const NodeData& node, double lambda) {
    const Matrix z = augment_ones(node.x);
    Matrix a = z.transpose() * z;
    a.diagonal().array() += lambda;
    const Vector u = numkit::solve_spd(a, Vector(z.transpose() * node.y)).x;
    return {u.head(node.x.cols()), u(node.x.cols())};
}

LinearModel fit_logistic_split(const NodeData& node, int irls_steps) {
    const Matrix z = augment_ones(node.x);
    const Vector t = (node.y.array() > 0).cast<double>();
    const double lambda = 1e-4;
    Vector beta = Vector::Zero(z.cols());
    for (int it = 0; it < irls_steps; ++it) {
        const Vector eta = z * beta;
        const Vector p = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
        const Vector wts = p.array() * (1.0 - p.array());
        Matrix hess = z.transpose() * wts.asDiagonal() * z;
        hess.diagonal().array() += lambda;
        const Vector grad = z.transpose() * (t - p) - lambda * beta;
        beta += numkit::solve_spd(hess, grad).x;
        if (!beta.allFinite()) throw Error("logistic split diverged");
    }
    return {beta.head(node.x.cols()), beta(node.x.cols())};
}

double cluster_separation(const std::vector<Matrix>& clusters) {
    require(clusters.size() >= 2, "cluster_separation: need at least two clusters");
    double diameter = 0.0;
    for (const Matrix& c : clusters)
        for (Index i = 0; i < c.rows(); ++i)
            for (Index j = i + 1; j < c.rows(); ++j) diameter = std::max(diameter, (c.row(i) - c.row(j)).norm());
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < clusters.size(); ++a)
        for (std::size_t b = a + 1; b < clusters.size(); ++b)
            for (Index i = 0; i < clusters[a].rows(); ++i)
                for (Index j = 0; j < clusters[b].rows(); ++j)
                    gap = std::min(gap, (clusters[a].row(i) - clusters[b].row(j)).norm());
    if (diameter == 0.0) return gap > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return gap / diameter;
}

std::vector<int> hyperclass_partition(const Matrix& x, const std::vector<int>& class_ids) {
    require_dims(static_cast<Index>(class_ids.size()) == x.rows(), "hyperclass_partition: label count mismatch");
    std::vector<int> classes(class_ids);
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const std::size_t k = classes.size();
    require(k >= 2 && k <= 16, "hyperclass_partition: between 2 and 16 classes supported");

    std::vector<int> best(k, 0);
    double best_score = -1.0;
    for (std::uint32_t mask = 1; mask < (1u << (k - 1)); ++mask) {
        std::vector<int> group(k, 0);
        for (std::size_t c = 1; c < k; ++c) group[c] = (mask >> (c - 1)) & 1u;
        std::vector<Index> rows0, rows1;
        for (Index i = 0; i < x.rows(); ++i) {
            const auto c = static_cast<std::size_t>(
                std::lower_bound(classes.begin(), classes.end(), class_ids[static_cast<std::size_t>(i)]) -
                classes.begin());
            (group[c] ? rows1 : rows0).push_back(i);
        }
        const double score = cluster_separation({take_rows(x, rows0), take_rows(x, rows1)});
        if (score > best_score) {
            best_score = score;
            best = group;
        }
    }
    return best;
}

std::vector<Index> bootstrap_sample(Index n, Rng& rng) {
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    return rows;
}

Forest train_forest(const data::Dataset& ds, Variant variant, int n_trees, std::uint64_t seed,
                    const ForestOptions& opt, std::vector<SplitTrace>* trace) {
    require(n_trees >= 1, "train_forest: n_trees must be >= 1");
    require(ds.n() >= 1 && ds.d() >= 1, "train_forest: empty dataset");
    Forest f;
    f.n_trees = n_trees;
    f.variant = variant;
    f.seed = seed;
    f.n_features = ds.d();
    f.trees.reserve(static_cast<std::size_t>(n_trees));
    for (int t = 0; t < n_trees; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<Index> rows = bootstrap_sample(ds.n(), rng);
        Builder b{ds.x, ds.y, variant, opt, rng, trace, {}};
        std::vector<bool> in_bag(static_cast<std::size_t>(ds.n()), false);
        for (Index r : rows) in_bag[static_cast<std::size_t>(r)] = true;
        b.tree.oob_fraction =
            static_cast<double>(std::count(in_bag.begin(), in_bag.end(), false)) / static_cast<double>(ds.n());
        std::sort(rows.begin(), rows.end());
        b.grow(rows, 0);
        f.trees.push_back(std::move(b.tree));
    }
    return f;
}

svmfam::Prediction predict_forest(const Forest& f, const Matrix& x) {
    require_dims(x.cols() == f.n_features, "predict_forest: feature count mismatch");
    svmfam::Prediction p;
    p.scores = Vector::Zero(x.rows());
    p.labels.resize(x.rows());
    for (Index i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (const Tree& t : f.trees) s += t.predict_pos(x.row(i));
        p.scores(i) = s / static_cast<double>(f.trees.size());
        p.labels(i) = p.scores(i) >= 0.5 ? 1.0 : -1.0;
    }
    return p;
}

}  // namespace twinbench::forests
