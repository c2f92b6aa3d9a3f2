#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace fieldrec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Location = Eigen::Vector2d;

// Raised when a numerical routine (factorization, optimizer) cannot proceed.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when an optimizer fails outright (e.g. every candidate scored -inf).
class OptimizationError : public NumericalError {
public:
    explicit OptimizationError(const std::string& msg) : NumericalError(msg) {}
};

// Cholesky with escalating diagonal jitter.  Tries the matrix as given, then
// adds 1e-10*scale to the diagonal, escalating tenfold up to 1e-4*scale before
// throwing NumericalError.  `scale` is the typical diagonal magnitude (the
// kernel variance for Gram matrices).
Eigen::LLT<Matrix> jittered_llt(const Matrix& a, double scale);

// log|A| from its Cholesky factor.
double llt_log_det(const Eigen::LLT<Matrix>& llt);

// log N(x; mean, cov) for small dense covariances.
double gaussian_log_density(const Vector& x, const Vector& mean, const Matrix& cov);

}  // namespace fieldrec
