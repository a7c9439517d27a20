#include "twinbench/kernels.hpp"

#include <cmath>
#include <sstream>

namespace twinbench::kernels {

KernelSpec KernelSpec::gaussian(double gamma) {
    require(gamma > 0.0 && std::isfinite(gamma), "Gaussian kernel needs gamma > 0");
    return {Kind::Gaussian, gamma};
}

std::string KernelSpec::describe() const {
    if (is_linear()) return "linear";
    std::ostringstream os;
    os << "gaussian(gamma=" << gamma << ")";
    return os.str();
}

Matrix gram(const Matrix& a, const Matrix& c, const KernelSpec& k) {
    require_dims(a.cols() == c.cols(), "gram: column counts differ");
    if (k.is_linear()) return a * c.transpose();
    require(k.gamma > 0.0, "gram: Gaussian kernel needs gamma > 0");
    // Direct differences keep k(x, x) exactly 1.
    Matrix out(a.rows(), c.rows());
    for (Index j = 0; j < c.rows(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            out(i, j) = std::exp(-k.gamma * (a.row(i) - c.row(j)).squaredNorm());
    return out;
}

}  // namespace twinbench::kernels
