#include "twinbench/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace twinbench::numkit {

namespace {

bool residual_ok(const Matrix& a, const Matrix& x, const Matrix& b) {
    if (!x.allFinite()) return false;
    const double scale = 1.0 + b.cwiseAbs().maxCoeff();
    return (a * x - b).cwiseAbs().maxCoeff() <= 1e-8 * scale;
}

SpdMultiSolution solve_spd_impl(const Matrix& a, const Matrix& b) {
    require_dims(a.rows() == a.cols(), "solve_spd: matrix is not square");
    require_dims(a.rows() == b.rows(), "solve_spd: right-hand side length mismatch");
    require(a.allFinite() && b.allFinite(), "solve_spd: non-finite entries");

    SpdMultiSolution out;
    if (a.rows() == 0) {
        out.x = Matrix(0, b.cols());
        return out;
    }
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) {
        out.x = llt.solve(b);
        if (residual_ok(a, out.x, b)) return out;
    }

    out.ridge_fallback = true;
    Matrix ridged = a;
    ridged.diagonal().array() += kRidge;
    Eigen::LLT<Matrix> llt_r(ridged);
    if (llt_r.info() == Eigen::Success) {
        out.x = llt_r.solve(b);
    } else {
        out.x = Eigen::LDLT<Matrix>(ridged).solve(b);
    }
    if (!out.x.allFinite()) throw Error("solve_spd: system is numerically singular even after ridge");
    return out;
}

double clamp_to(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

Vector project(const BoxQp& p, const Vector& x) {
    Vector out(x.size());
    for (Index i = 0; i < x.size(); ++i) out(i) = clamp_to(x(i), p.lower(i), p.upper(i));
    return out;
}

double pg_norm(const BoxQp& p, const Vector& x, const Vector& g) {
    double r = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        const double step = clamp_to(x(i) - g(i), p.lower(i), p.upper(i)) - x(i);
        r = std::max(r, std::abs(step));
    }
    return r;
}

// Newton step on the currently free coordinates; accepts only if it lowers
// the objective. Returns true when x changed.
bool polish(const BoxQp& p, Vector& x, Vector& g, double& f) {
    const Index n = x.size();
    std::vector<Index> free_idx;
    free_idx.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const bool at_lo = x(i) <= p.lower(i) && g(i) >= 0.0;
        const bool at_hi = x(i) >= p.upper(i) && g(i) <= 0.0;
        if (!at_lo && !at_hi) free_idx.push_back(i);
    }
    if (free_idx.empty()) return false;

    const auto nf = static_cast<Index>(free_idx.size());
    Matrix mff(nf, nf);
    Vector rhs(nf);
    for (Index a = 0; a < nf; ++a) {
        for (Index b = 0; b < nf; ++b) mff(a, b) = p.m(free_idx[a], free_idx[b]);
        // q_F - M_F,* x + M_FF x_F  ==  -g_F + M_FF x_F
        rhs(a) = -g(free_idx[a]);
    }
    // Solve for the step on the free block: M_FF dz = -g_F.
    const double shift = 1e-12 * std::max(1.0, mff.diagonal().cwiseAbs().maxCoeff());
    Matrix reg = mff;
    reg.diagonal().array() += shift;
    Eigen::LDLT<Matrix> ldlt(reg);
    if (ldlt.info() != Eigen::Success) return false;
    Vector dz = ldlt.solve(rhs);
    if (!dz.allFinite()) return false;

    Vector dir = Vector::Zero(n);
    for (Index a = 0; a < nf; ++a) dir(free_idx[a]) = dz(a);

    // Ratio test keeps the segment feasible.
    double tmax = 1.0;
    for (Index i = 0; i < n; ++i) {
        if (dir(i) > 0.0 && std::isfinite(p.upper(i)))
            tmax = std::min(tmax, (p.upper(i) - x(i)) / dir(i));
        else if (dir(i) < 0.0 && std::isfinite(p.lower(i)))
            tmax = std::min(tmax, (p.lower(i) - x(i)) / dir(i));
    }
    tmax = std::max(tmax, 0.0);

    Vector cand_a = project(p, x + tmax * dir);
    Vector cand_b = project(p, x + dir);
    const double fa = p.objective(cand_a);
    const double fb = p.objective(cand_b);
    const Vector& best = fb < fa ? cand_b : cand_a;
    const double fbest = std::min(fa, fb);
    if (!(fbest < f)) return false;
    x = best;
    g = p.m * x - p.q;
    f = fbest;
    return true;
}

}  // namespace

SpdSolution solve_spd(const Matrix& a, const Vector& b) {
    auto r = solve_spd_impl(a, b);
    return {r.x.col(0), r.ridge_fallback};
}

SpdMultiSolution solve_spd(const Matrix& a, const Matrix& b) { return solve_spd_impl(a, b); }

double BoxQp::objective(const Vector& x) const { return 0.5 * x.dot(m * x) - q.dot(x); }

void BoxQp::validate() const {
    require_dims(m.rows() == m.cols(), "BoxQp: M not square");
    require_dims(q.size() == m.rows() && lower.size() == m.rows() && upper.size() == m.rows(),
                 "BoxQp: vector length mismatch");
    require(m.allFinite() && q.allFinite(), "BoxQp: non-finite entries");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, "BoxQp: M not symmetric");
    for (Index i = 0; i < lower.size(); ++i) {
        require(!std::isnan(lower(i)) && !std::isnan(upper(i)), "BoxQp: NaN bound");
        require(lower(i) <= upper(i), "BoxQp: lower > upper");
    }
}

BoxQp BoxQp::uniform(Matrix m, Vector q, double lo, double hi) {
    const Index n = q.size();
    return BoxQp{std::move(m), std::move(q), Vector::Constant(n, lo), Vector::Constant(n, hi)};
}

double projected_gradient_norm(const BoxQp& p, const Vector& x) {
    return pg_norm(p, x, p.m * x - p.q);
}

QpSolution solve_box_qp(const BoxQp& p, double tol, std::size_t max_iter, const Vector* warm_start) {
    p.validate();
    require(tol > 0.0, "solve_box_qp: tol must be positive");
    const Index n = p.q.size();

    QpSolution out;
    Vector x = Vector::Zero(n);
    if (warm_start) {
        require_dims(warm_start->size() == n, "solve_box_qp: warm start length mismatch");
        x = *warm_start;
    }
    x = project(p, x);
    if (n == 0) {
        out.x = x;
        out.converged = true;
        return out;
    }

    const double m_scale = std::max(1.0, p.m.diagonal().cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Matrix> spectrum(p.m, Eigen::EigenvaluesOnly);
    if (spectrum.eigenvalues().minCoeff() < -1e-10 * m_scale)
        throw QpError("solve_box_qp: M is not positive semidefinite");
    Vector g = p.m * x - p.q;
    double f = p.objective(x);
    double pg = pg_norm(p, x, g);
    double alpha = pg > 0.0 ? 1.0 / pg : 1.0;
    constexpr double kAlphaMin = 1e-12;
    constexpr double kAlphaMax = 1e12;
    constexpr std::size_t kPolishEvery = 10;

    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        pg = pg_norm(p, x, g);
        if (pg <= tol) {
            out.converged = true;
            break;
        }
        if (it > 0 && it % kPolishEvery == 0 && polish(p, x, g, f)) continue;

        Vector d = project(p, x - alpha * g) - x;
        double gd = g.dot(d);
        if (!(gd < 0.0)) {
            // Step too short or too long to make progress: fall back to a unit step.
            alpha = 1.0;
            d = project(p, x - g) - x;
            gd = g.dot(d);
            if (!(gd < 0.0)) break;
        }
        const Vector md = p.m * d;
        const double dmd = d.dot(md);
        const double dd = d.squaredNorm();
        if (dmd < -1e-10 * m_scale * dd) throw QpError("solve_box_qp: M is not positive semidefinite");

        double lambda = 1.0;
        if (dmd > 0.0) lambda = std::min(1.0, -gd / dmd);
        x += lambda * d;
        g += lambda * md;
        f = p.objective(x);
        if (x.cwiseAbs().maxCoeff() > 1e15 || !std::isfinite(f))
            throw QpError("solve_box_qp: objective unbounded below on the feasible set");

        const double sy = lambda * lambda * dmd;
        const double ss = lambda * lambda * dd;
        alpha = sy > 0.0 ? std::clamp(ss / sy, kAlphaMin, kAlphaMax) : kAlphaMax;
    }

    // Final polish often snaps an almost-converged iterate onto the exact face.
    if (!out.converged) {
        polish(p, x, g, f);
        g = p.m * x - p.q;
        out.converged = pg_norm(p, x, g) <= tol;
    }
    out.x = x;
    out.objective = p.objective(x);
    out.iterations = it;
    out.projected_gradient = pg_norm(p, x, g);
    return out;
}

SymEigen jacobi_eigen(const Matrix& a_in, double tol, std::size_t max_sweeps) {
    require_dims(a_in.rows() == a_in.cols(), "jacobi_eigen: matrix not square");
    require(a_in.allFinite(), "jacobi_eigen: non-finite entries");
    const Index n = a_in.rows();
    Matrix a = 0.5 * (a_in + a_in.transpose());
    Matrix v = Matrix::Identity(n, n);
    const double frob = std::max(a.norm(), std::numeric_limits<double>::min());

    SymEigen out;
    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (std::sqrt(2.0 * off) <= tol * frob) break;
        ++out.sweeps;
        for (Index p = 0; p < n - 1; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= std::numeric_limits<double>::min()) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Index k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Index k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&](Index l, Index r) { return a(l, l) < a(r, r); });
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Index k = 0; k < n; ++k) {
        const Index src = order[static_cast<std::size_t>(k)];
        out.values(k) = a(src, src);
        out.vectors.col(k) = v.col(src).normalized();
    }
    return out;
}

GenEigenpair min_gen_eigenpair(const Matrix& a, const Matrix& b, double ridge) {
    require_dims(a.rows() == a.cols() && b.rows() == b.cols() && a.rows() == b.rows(),
                 "min_gen_eigenpair: size mismatch");
    require(ridge >= 0.0, "min_gen_eigenpair: ridge must be non-negative");
    require(a.allFinite() && b.allFinite(), "min_gen_eigenpair: non-finite entries");
    const Index n = a.rows();
    require(n > 0, "min_gen_eigenpair: empty problem");

    Matrix ar = a;
    Matrix br = b;
    ar.diagonal().array() += ridge;
    br.diagonal().array() += ridge;
    Eigen::LLT<Matrix> llt(br);
    if (llt.info() != Eigen::Success)
        throw InvalidArgument("min_gen_eigenpair: B + ridge*I is not positive definite");
    const Matrix l = llt.matrixL();
    const Vector diag = l.diagonal();
    if (diag.minCoeff() <= 0.0)
        throw InvalidArgument("min_gen_eigenpair: B + ridge*I is not positive definite");

    // C = L^-1 A L^-T
    const Matrix y = l.triangularView<Eigen::Lower>().solve(ar);
    Matrix c = l.triangularView<Eigen::Lower>().solve(y.transpose());
    c = 0.5 * (c + c.transpose());
    const SymEigen eig = jacobi_eigen(c);

    GenEigenpair out;
    out.value = eig.values(0);
    Vector v = l.transpose().triangularView<Eigen::Upper>().solve(Vector(eig.vectors.col(0)));
    out.vector = v.normalized();
    const double ratio = diag.maxCoeff() / diag.minCoeff();
    out.condition = ratio * ratio;
    return out;
}

double power_iteration_sq_norm(const Matrix& a, std::size_t iters, double tol) {
    const Index n = a.cols();
    if (n == 0 || a.rows() == 0) return 0.0;
    Vector v(n);
    for (Index i = 0; i < n; ++i) v(i) = 1.0 + 0.01 * static_cast<double>(i % 7);
    v.normalize();
    double est = 0.0;
    for (std::size_t k = 0; k < iters; ++k) {
        Vector w = a.transpose() * (a * v);
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        const double next = v.dot(w);
        v = w / norm;
        if (std::abs(next - est) <= tol * std::max(1.0, std::abs(next))) {
            est = next;
            break;
        }
        est = next;
    }
    // Rayleigh quotient of the final iterate, never below the running estimate.
    return std::max(est, (a * v).squaredNorm());
}

double l1_ls_objective(const Matrix& a, const Matrix& b, const Matrix& w, double lambda) {
    return (a * w - b).squaredNorm() + lambda * w.cwiseAbs().sum();
}

FistaResult fista_l1(const Matrix& a, const Matrix& b, double lambda, std::size_t max_iter, double tol) {
    require(lambda >= 0.0, "fista_l1: lambda must be non-negative");
    require_dims(a.rows() == b.rows(), "fista_l1: A and B row counts differ");
    require(a.allFinite() && b.allFinite(), "fista_l1: non-finite entries");

    FistaResult out;
    out.w = Matrix::Zero(a.cols(), b.cols());
    const double lip = 2.0 * power_iteration_sq_norm(a) * (1.0 + 1e-6);
    if (lip == 0.0) {
        out.objective = l1_ls_objective(a, b, out.w, lambda);
        out.converged = true;
        return out;
    }
    const double thr = lambda / lip;
    const Matrix atb = a.transpose() * b;
    const Matrix ata = a.transpose() * a;
    auto shrink = [thr](double v) {
        const double m = std::abs(v) - thr;
        return m > 0.0 ? (v > 0.0 ? m : -m) : 0.0;
    };

    Matrix x = out.w;
    Matrix y = x;
    double t = 1.0;
    double fx = l1_ls_objective(a, b, x, lambda);
    int stalls = 0;
    std::size_t it = 0;
    for (; it < max_iter; ++it) {
        const Matrix grad = 2.0 * (ata * y - atb);
        const Matrix z = (y - grad / lip).unaryExpr(shrink);
        const double fz = l1_ls_objective(a, b, z, lambda);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (fz <= fx) {
            const double step = (z - x).norm();
            y = z + ((t - 1.0) / t_next) * (z - x);
            const double drop = fx - fz;
            x = z;
            fx = fz;
            t = t_next;
            stalls = 0;
            if (step <= tol * std::max(1.0, x.norm()) && drop <= tol * std::max(1.0, fx)) {
                out.converged = true;
                ++it;
                break;
            }
        } else {
            // Momentum overshoot: restart from the last accepted iterate.
            y = x;
            t = 1.0;
            // A plain proximal step from x that still fails means rounding noise at the optimum.
            if (++stalls >= 2) {
                out.converged = true;
                ++it;
                break;
            }
        }
    }
    out.w = x;
    out.objective = fx;
    out.iterations = it;
    return out;
}

}  // namespace twinbench::numkit
