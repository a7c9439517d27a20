#pragma once

// Dense numerical kernels shared by every model: SPD solves, box-constrained
// QP, generalized symmetric eigenpairs and l1-regularized least squares.

#include "twinbench/matrix.hpp"

#include <cstddef>
#include <limits>

namespace twinbench::numkit {

constexpr double kRidge = 1e-7;
constexpr double kDefaultTol = 1e-6;
constexpr std::size_t kDefaultMaxIter = 5000;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct SpdSolution {
    Vector x;
    bool ridge_fallback = false;
};

/// Solve A x = b for symmetric (semi)definite A. A singular or indefinite
/// system is retried as (A + 1e-7 I) x = b and `ridge_fallback` is set.
SpdSolution solve_spd(const Matrix& a, const Vector& b);

/// Multiple right-hand sides; same fallback rule.
struct SpdMultiSolution {
    Matrix x;
    bool ridge_fallback = false;
};
SpdMultiSolution solve_spd(const Matrix& a, const Matrix& b);

/// min 1/2 x'Mx - q'x  subject to lower <= x <= upper (bounds may be +-inf).
struct BoxQp {
    Matrix m;
    Vector q;
    Vector lower;
    Vector upper;

    double objective(const Vector& x) const;
    void validate() const;

    /// Box [lo, hi] on every coordinate.
    static BoxQp uniform(Matrix m, Vector q, double lo, double hi);
};

struct QpSolution {
    Vector x;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    double projected_gradient = 0.0;  // inf-norm at x
};

class QpError : public Error {
public:
    using Error::Error;
};

/// Projected gradient with Barzilai-Borwein steps and exact line search along
/// the projected direction, interleaved with active-set Newton polish.
///
/// Throws QpError when negative curvature is found (M not PSD) or when the
/// objective is unbounded below along the feasible set. Exhausting
/// `max_iter` returns the best iterate with converged == false.
QpSolution solve_box_qp(const BoxQp& p, double tol = kDefaultTol,
                        std::size_t max_iter = kDefaultMaxIter,
                        const Vector* warm_start = nullptr);

/// Largest projected-gradient component at x (0 at a KKT point).
double projected_gradient_norm(const BoxQp& p, const Vector& x);

struct SymEigen {
    Vector values;   // ascending
    Matrix vectors;  // columns, unit norm
    std::size_t sweeps = 0;
};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
SymEigen jacobi_eigen(const Matrix& a, double tol = 1e-14, std::size_t max_sweeps = 100);

struct GenEigenpair {
    double value = 0.0;
    Vector vector;
    double condition = 1.0;  // estimate of cond(B + ridge I) from its Cholesky factor
};

/// Smallest eigenpair of (A + ridge I) v = lambda (B + ridge I) v.
/// Cholesky-reduces B, diagonalizes L^-1 A L^-T with Jacobi, returns unit-norm v.
/// Throws InvalidArgument when B + ridge I is not positive definite.
GenEigenpair min_gen_eigenpair(const Matrix& a, const Matrix& b, double ridge);

/// Largest eigenvalue of A'A by power iteration.
double power_iteration_sq_norm(const Matrix& a, std::size_t iters = 500, double tol = 1e-12);

struct FistaResult {
    Matrix w;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// min ||A W - B||_F^2 + lambda * ||W||_1 with monotone FISTA (momentum reset
/// whenever a step would increase the objective). Step 1/(2L), L = lambda_max(A'A).
FistaResult fista_l1(const Matrix& a, const Matrix& b, double lambda,
                     std::size_t max_iter = kDefaultMaxIter, double tol = 1e-12);

/// Objective used by fista_l1.
double l1_ls_objective(const Matrix& a, const Matrix& b, const Matrix& w, double lambda);

}  // namespace twinbench::numkit
