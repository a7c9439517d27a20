#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace twinbench {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not line up.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Input violates a documented precondition (bad parameter, non-finite value, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

inline void require(bool cond, const std::string& what) {
    if (!cond) throw InvalidArgument(what);
}

inline void require_dims(bool cond, const std::string& what) {
    if (!cond) throw DimensionError(what);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Rows of `m` picked by `idx`, in order.
template <class IndexRange>
Matrix take_rows(const Matrix& m, const IndexRange& idx) {
    Matrix out(static_cast<Index>(idx.size()), m.cols());
    Index r = 0;
    for (auto i : idx) out.row(r++) = m.row(static_cast<Index>(i));
    return out;
}

template <class IndexRange>
Vector take(const Vector& v, const IndexRange& idx) {
    Vector out(static_cast<Index>(idx.size()));
    Index r = 0;
    for (auto i : idx) out(r++) = v(static_cast<Index>(i));
    return out;
}

/// [X e]: appends a column of ones.
inline Matrix augment_ones(const Matrix& x) {
    Matrix out(x.rows(), x.cols() + 1);
    out.leftCols(x.cols()) = x;
    out.col(x.cols()).setOnes();
    return out;
}

}  // namespace twinbench
