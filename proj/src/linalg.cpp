#include "fieldrec/linalg.hpp"

#include <cmath>

namespace fieldrec {

Eigen::LLT<Matrix> jittered_llt(const Matrix& a, double scale) {
    if (a.rows() != a.cols())
        throw std::invalid_argument("jittered_llt: matrix must be square");
    const double base = std::abs(scale);
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success) return llt;
    for (double jitter = 1e-10 * base; jitter <= 1e-4 * base * (1.0 + 1e-12); jitter *= 10.0) {
        Matrix aj = a;
        aj.diagonal().array() += jitter;
        llt.compute(aj);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw NumericalError("jittered_llt: matrix not positive definite after max jitter");
}

double llt_log_det(const Eigen::LLT<Matrix>& llt) {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double gaussian_log_density(const Vector& x, const Vector& mean, const Matrix& cov) {
    if (x.size() != mean.size() || cov.rows() != x.size() || cov.cols() != x.size())
        throw std::invalid_argument("gaussian_log_density: dimension mismatch");
    const double scale = cov.diagonal().cwiseAbs().mean();
    const Eigen::LLT<Matrix> llt = jittered_llt(cov, scale);
    const Vector r = x - mean;
    const Vector alpha = llt.solve(r);
    const double n = static_cast<double>(x.size());
    return -0.5 * (n * std::log(2.0 * M_PI) + llt_log_det(llt) + r.dot(alpha));
}

}  // namespace fieldrec
