#include "twinbench/featsel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace twinbench::featsel {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ClassMoments {
    double mean1 = 0, mean2 = 0, var1 = 0, var2 = 0;
    double n1 = 0, n2 = 0;
};

// Sample (n-1) variances; a class with one member has variance 0.
ClassMoments moments(const Vector& f, const Vector& y) {
    ClassMoments m;
    for (Index i = 0; i < f.size(); ++i) {
        if (y(i) > 0) {
            m.mean1 += f(i);
            m.n1 += 1;
        } else {
            m.mean2 += f(i);
            m.n2 += 1;
        }
    }
    m.mean1 /= m.n1;
    m.mean2 /= m.n2;
    for (Index i = 0; i < f.size(); ++i) {
        if (y(i) > 0)
            m.var1 += (f(i) - m.mean1) * (f(i) - m.mean1);
        else
            m.var2 += (f(i) - m.mean2) * (f(i) - m.mean2);
    }
    m.var1 = m.n1 > 1 ? m.var1 / (m.n1 - 1) : 0.0;
    m.var2 = m.n2 > 1 ? m.var2 / (m.n2 - 1) : 0.0;
    return m;
}

// Mid-ranks (1-based) of v.
std::vector<double> mid_ranks(const Vector& v) {
    const auto n = static_cast<std::size_t>(v.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return v(static_cast<Index>(a)) < v(static_cast<Index>(b));
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v(static_cast<Index>(idx[j + 1])) == v(static_cast<Index>(idx[i]))) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = r;
        i = j + 1;
    }
    return ranks;
}

// Mann-Whitney U of the positive class.
double u_statistic(const Vector& f, const Vector& y, double& n1, double& n2) {
    const auto r = mid_ranks(f);
    double r1 = 0.0;
    n1 = n2 = 0.0;
    for (Index i = 0; i < f.size(); ++i) {
        if (y(i) > 0) {
            r1 += r[static_cast<std::size_t>(i)];
            n1 += 1;
        } else {
            n2 += 1;
        }
    }
    return r1 - n1 * (n1 + 1.0) / 2.0;
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

const std::vector<Criterion>& all_criteria() {
    static const std::vector<Criterion> all{Criterion::TTest,   Criterion::ROC,           Criterion::Wilcoxon,
                                            Criterion::Entropy, Criterion::Bhattacharyya, Criterion::MRMR,
                                            Criterion::NCA};
    return all;
}

std::string display_name(Criterion c) {
    switch (c) {
        case Criterion::TTest: return "T-Test";
        case Criterion::ROC: return "ROC";
        case Criterion::Wilcoxon: return "Wilcoxon";
        case Criterion::Entropy: return "Entropy";
        case Criterion::Bhattacharyya: return "Bhattacharyya";
        case Criterion::MRMR: return "MRMR";
        case Criterion::NCA: return "NCA";
    }
    return "?";
}

std::string key(Criterion c) {
    switch (c) {
        case Criterion::TTest: return "ttest";
        case Criterion::ROC: return "roc";
        case Criterion::Wilcoxon: return "wilcoxon";
        case Criterion::Entropy: return "entropy";
        case Criterion::Bhattacharyya: return "bhattacharyya";
        case Criterion::MRMR: return "mrmr";
        case Criterion::NCA: return "nca";
    }
    return "?";
}

Criterion parse_criterion(const std::string& s) {
    const std::string l = lower(s);
    for (Criterion c : all_criteria())
        if (l == key(c) || l == lower(display_name(c))) return c;
    throw InvalidArgument("unknown feature-selection criterion '" + s + "'");
}

bool is_filter(Criterion c) { return c != Criterion::MRMR && c != Criterion::NCA; }

std::vector<Index> Ranking::ranks() const {
    std::vector<Index> r(order.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) r[static_cast<std::size_t>(order[pos])] = static_cast<Index>(pos + 1);
    return r;
}

std::vector<Index> order_by_score(const std::vector<double>& scores) {
    std::vector<Index> order(scores.size());
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
        return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    return order;
}

FilterScore filter_score(Criterion c, const Vector& f, const Vector& y) {
    require_dims(f.size() == y.size(), "filter_score: length mismatch");
    FilterScore out;
    switch (c) {
        case Criterion::TTest: {
            const auto m = moments(f, y);
            const double pooled = ((m.n1 - 1) * m.var1 + (m.n2 - 1) * m.var2) / (m.n1 + m.n2 - 2);
            const double diff = std::abs(m.mean1 - m.mean2);
            if (!(pooled > 0.0)) {
                out.degenerate = true;
                out.score = diff > 0.0 ? kInf : 0.0;
            } else {
                out.score = diff / (std::sqrt(pooled) * std::sqrt(1.0 / m.n1 + 1.0 / m.n2));
            }
            return out;
        }
        case Criterion::Entropy:
        case Criterion::Bhattacharyya: {
            const auto m = moments(f, y);
            const double diff = m.mean1 - m.mean2;
            if (!(m.var1 > 0.0) || !(m.var2 > 0.0)) {
                out.degenerate = true;
                // One degenerate class against a spread one still separates the distributions.
                const bool same = diff == 0.0 && m.var1 == m.var2;
                out.score = same ? 0.0 : kInf;
                return out;
            }
            if (c == Criterion::Entropy) {
                out.score = 0.5 * ((m.var1 / m.var2 + m.var2 / m.var1) + diff * diff * (1.0 / m.var1 + 1.0 / m.var2)) - 1.0;
            } else {
                const double s = m.var1 + m.var2;
                out.score = 0.25 * diff * diff / s + 0.5 * std::log(s / (2.0 * std::sqrt(m.var1) * std::sqrt(m.var2)));
            }
            return out;
        }
        case Criterion::ROC: {
            double n1 = 0, n2 = 0;
            const double u = u_statistic(f, y, n1, n2);
            out.score = std::abs(u / (n1 * n2) - 0.5);
            return out;
        }
        case Criterion::Wilcoxon: {
            double n1 = 0, n2 = 0;
            const double u = u_statistic(f, y, n1, n2);
            out.score = std::abs(u - n1 * n2 / 2.0) / std::sqrt(n1 * n2 * (n1 + n2 + 1.0) / 12.0);
            return out;
        }
        case Criterion::MRMR:
        case Criterion::NCA:
            break;
    }
    throw InvalidArgument("filter_score: " + display_name(c) + " is not a filter criterion");
}

Ranking rank_by_criterion(const data::Dataset& ds, Criterion c) {
    require(is_filter(c), "rank_by_criterion: " + display_name(c) + " is not a filter criterion");
    require(ds.count(1.0) > 0 && ds.count(-1.0) > 0, "rank_by_criterion: both classes must be present");
    Ranking r;
    r.criterion = c;
    r.scores.resize(static_cast<std::size_t>(ds.d()));
    r.degenerate.resize(static_cast<std::size_t>(ds.d()));
    for (Index j = 0; j < ds.d(); ++j) {
        const auto s = filter_score(c, ds.x.col(j), ds.y);
        r.scores[static_cast<std::size_t>(j)] = s.score;
        r.degenerate[static_cast<std::size_t>(j)] = s.degenerate;
    }
    r.order = order_by_score(r.scores);
    return r;
}

std::vector<int> equal_frequency_bins(const Vector& v, int bins) {
    require(bins >= 2, "equal_frequency_bins: need at least two bins");
    const auto n = static_cast<std::size_t>(v.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return v(static_cast<Index>(a)) < v(static_cast<Index>(b));
    });
    std::vector<int> out(n, 0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v(static_cast<Index>(idx[j + 1])) == v(static_cast<Index>(idx[i]))) ++j;
        const int bin = static_cast<int>((i * static_cast<std::size_t>(bins)) / n);
        for (std::size_t t = i; t <= j; ++t) out[idx[t]] = bin;
        i = j + 1;
    }
    return out;
}

double mutual_information(const std::vector<int>& a, const std::vector<int>& b) {
    require_dims(a.size() == b.size(), "mutual_information: length mismatch");
    if (a.empty()) return 0.0;
    auto compress = [](const std::vector<int>& v, int& levels) {
        std::vector<int> uniq(v);
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        levels = static_cast<int>(uniq.size());
        std::vector<int> out(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
            out[i] = static_cast<int>(std::lower_bound(uniq.begin(), uniq.end(), v[i]) - uniq.begin());
        return out;
    };
    int ka = 0, kb = 0;
    const auto ca = compress(a, ka);
    const auto cb = compress(b, kb);
    std::vector<double> joint(static_cast<std::size_t>(ka * kb), 0.0), pa(static_cast<std::size_t>(ka), 0.0),
        pb(static_cast<std::size_t>(kb), 0.0);
    for (std::size_t i = 0; i < ca.size(); ++i) {
        joint[static_cast<std::size_t>(ca[i] * kb + cb[i])] += 1.0;
        pa[static_cast<std::size_t>(ca[i])] += 1.0;
        pb[static_cast<std::size_t>(cb[i])] += 1.0;
    }
    const double n = static_cast<double>(ca.size());
    double mi = 0.0;
    for (int i = 0; i < ka; ++i) {
        for (int j = 0; j < kb; ++j) {
            const double c = joint[static_cast<std::size_t>(i * kb + j)];
            if (c > 0.0) mi += (c / n) * std::log(c * n / (pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(j)]));
        }
    }
    return std::max(mi, 0.0);
}

Ranking rank_mrmr(const data::Dataset& ds, int bins, std::size_t greedy_limit) {
    require(bins >= 2, "rank_mrmr: bins must be at least 2");
    const auto d = static_cast<std::size_t>(ds.d());
    std::vector<std::vector<int>> binned(d);
    for (std::size_t j = 0; j < d; ++j) binned[j] = equal_frequency_bins(ds.x.col(static_cast<Index>(j)), bins);
    std::vector<int> labels(static_cast<std::size_t>(ds.n()));
    for (Index i = 0; i < ds.n(); ++i) labels[static_cast<std::size_t>(i)] = ds.y(i) > 0 ? 1 : 0;

    std::vector<double> relevance(d);
    for (std::size_t j = 0; j < d; ++j) relevance[j] = mutual_information(binned[j], labels);

    Ranking r;
    r.criterion = Criterion::MRMR;
    r.scores.assign(d, 0.0);
    r.degenerate.assign(d, false);
    std::vector<bool> taken(d, false);
    std::vector<double> redundancy(d, 0.0);  // running sum over selected features

    const std::size_t greedy = greedy_limit == 0 ? d : std::min(greedy_limit, d);
    for (std::size_t step = 0; step < greedy; ++step) {
        std::size_t best = d;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < d; ++j) {
            if (taken[j]) continue;
            const double score = step == 0 ? relevance[j] : relevance[j] - redundancy[j] / static_cast<double>(step);
            if (score > best_score) {
                best_score = score;
                best = j;
            }
        }
        taken[best] = true;
        r.scores[best] = best_score;
        r.order.push_back(static_cast<Index>(best));
        if (step + 1 == d) break;
        for (std::size_t j = 0; j < d; ++j)
            if (!taken[j]) redundancy[j] += mutual_information(binned[j], binned[best]);
    }
    if (greedy < d) {
        std::vector<Index> rest;
        for (std::size_t j = 0; j < d; ++j) {
            if (taken[j]) continue;
            r.scores[j] = relevance[j] - redundancy[j] / static_cast<double>(greedy);
            rest.push_back(static_cast<Index>(j));
        }
        std::stable_sort(rest.begin(), rest.end(), [&](Index a, Index b) {
            return r.scores[static_cast<std::size_t>(a)] > r.scores[static_cast<std::size_t>(b)];
        });
        r.order.insert(r.order.end(), rest.begin(), rest.end());
    }
    return r;
}

double nca_objective(const Matrix& x, const Vector& y, const Vector& w, double lambda, Vector* grad) {
    const Index n = x.rows();
    const Matrix xw = x * w.asDiagonal();
    const Vector sq = xw.rowwise().squaredNorm();
    Matrix dist = -2.0 * (xw * xw.transpose());
    dist.colwise() += sq;
    dist.rowwise() += sq.transpose();

    Matrix p(n, n);
    Vector pi(n);
    for (Index i = 0; i < n; ++i) {
        double dmin = std::numeric_limits<double>::infinity();
        for (Index j = 0; j < n; ++j)
            if (j != i) dmin = std::min(dmin, std::max(0.0, dist(i, j)));
        double z = 0.0;
        for (Index j = 0; j < n; ++j) {
            p(i, j) = j == i ? 0.0 : std::exp(-(std::max(0.0, dist(i, j)) - dmin));
            z += p(i, j);
        }
        double same = 0.0;
        for (Index j = 0; j < n; ++j) {
            p(i, j) /= z;
            if (y(j) == y(i)) same += p(i, j);
        }
        pi(i) = same;
    }
    const double nn = static_cast<double>(n);
    const double objective = pi.sum() / nn - lambda * w.squaredNorm();

    if (grad) {
        // C_ij = (p_i * p_ij - [y_i == y_j] p_ij) / n ;  g_r = 2 w_r sum_ij C_ij (x_ir - x_jr)^2 - 2 lambda w_r
        Matrix c(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                c(i, j) = (pi(i) * p(i, j) - (y(i) == y(j) ? p(i, j) : 0.0)) / nn;
        const Vector rows = c.rowwise().sum();
        const Vector cols = c.colwise().sum().transpose();
        const Matrix x2 = x.array().square().matrix();
        const Matrix cx = c * x;
        Vector s = x2.transpose() * rows + x2.transpose() * cols;
        s -= 2.0 * (x.array() * cx.array()).colwise().sum().matrix().transpose();
        *grad = 2.0 * w.cwiseProduct(s) - 2.0 * lambda * w;
    }
    return objective;
}

NcaResult fit_nca(const Matrix& x, const Vector& y, const NcaOptions& opt) {
    require(opt.lambda >= 0.0, "fit_nca: lambda must be non-negative");
    require_dims(x.rows() == y.size(), "fit_nca: label count mismatch");
    require(x.rows() >= 2, "fit_nca: need at least two samples");
    NcaResult out;
    Vector w = Vector::Ones(x.cols());
    Vector g;
    double f = nca_objective(x, y, w, opt.lambda, &g);
    out.initial_objective = f;

    double step = 1.0;
    std::size_t it = 0;
    for (; it < opt.iters; ++it) {
        const double gg = g.squaredNorm();
        if (gg == 0.0 || g.cwiseAbs().maxCoeff() <= 1e-12) break;
        bool accepted = false;
        Vector w_new, g_new;
        double f_new = f;
        double eta = step;
        for (int bt = 0; bt < 60; ++bt) {
            w_new = w + eta * g;
            f_new = nca_objective(x, y, w_new, opt.lambda, &g_new);
            if (f_new >= f + 1e-4 * eta * gg) {
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;
        const Vector s = w_new - w;
        const Vector dg = g - g_new;  // ascent: curvature of -F
        const double sy = s.dot(dg);
        step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-10, 1e10) : std::min(2.0 * eta, 1e10);
        const double gain = f_new - f;
        w = w_new;
        g = g_new;
        f = f_new;
        if (gain <= opt.tol * std::max(1.0, std::abs(f))) {
            ++it;
            break;
        }
    }
    out.weights = w;
    out.final_objective = f;
    out.iterations = it;
    return out;
}

Ranking rank_nca(const data::Dataset& ds, double lambda, std::size_t iters, std::uint64_t seed) {
    NcaOptions opt;
    opt.lambda = lambda;
    opt.iters = iters;
    opt.seed = seed;
    const NcaResult fit = fit_nca(ds.x, ds.y, opt);

    Ranking r;
    r.criterion = Criterion::NCA;
    r.scores.resize(static_cast<std::size_t>(ds.d()));
    r.degenerate.assign(static_cast<std::size_t>(ds.d()), false);
    const Vector w2 = fit.weights.array().square();
    const double cut = 1e-10 * std::max(1.0, w2.size() ? w2.maxCoeff() : 0.0);
    for (Index j = 0; j < ds.d(); ++j) {
        // Weights driven to (numerical) zero are eliminated and tie at 0.
        r.scores[static_cast<std::size_t>(j)] = w2(j) <= cut ? 0.0 : w2(j);
    }
    r.order = order_by_score(r.scores);
    return r;
}

data::Dataset select_top(const Ranking& r, Index m, const data::Dataset& ds) {
    require(m >= 1, "select_top: m must be at least 1");
    require(m <= ds.d(), "select_top: m exceeds the number of features");
    require_dims(static_cast<Index>(r.order.size()) == ds.d(), "select_top: ranking does not match dataset");
    std::vector<Index> cols(r.order.begin(), r.order.begin() + m);
    return ds.subset_cols(cols);
}

}  // namespace twinbench::featsel
