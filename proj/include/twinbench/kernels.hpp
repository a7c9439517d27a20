#pragma once

#include "twinbench/matrix.hpp"

#include <string>

namespace twinbench::kernels {

struct KernelSpec {
    enum class Kind { Linear, Gaussian };
    Kind kind = Kind::Linear;
    double gamma = 1.0;  // Gaussian only: exp(-gamma * ||x - z||^2)

    static KernelSpec linear() { return {Kind::Linear, 1.0}; }
    static KernelSpec gaussian(double gamma);

    bool is_linear() const { return kind == Kind::Linear; }
    std::string describe() const;
};

/// result(i, j) = k(a_i, c_j) for rows a_i of A and c_j of C.
Matrix gram(const Matrix& a, const Matrix& c, const KernelSpec& k);

}  // namespace twinbench::kernels
