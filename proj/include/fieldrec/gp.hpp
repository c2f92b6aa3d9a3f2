#pragma once

#include <functional>
#include <vector>

#include "fieldrec/linalg.hpp"
#include "fieldrec/rng.hpp"

namespace fieldrec {

// Matern-3/2 kernel parameters.
struct KernelSpec {
    double variance = 1.0;     // prior field variance at any point
    double lengthscale = 1.0;  // in location units
    void validate() const;
};

using MeanFunction = std::function<double(const Location&)>;
MeanFunction constant_mean(double value);

// Field prior: mean function, kernel, and per-observation noise variance.
struct GpModel {
    MeanFunction mean;
    KernelSpec kernel;
    double noise_var = 0.0;
    void validate() const;
};

double matern32_at_distance(double distance, const KernelSpec& spec);
double matern32(const Location& x, const Location& y, const KernelSpec& spec);

Matrix build_covariance(const std::vector<Location>& locations, const KernelSpec& spec);
Vector cross_covariance(const std::vector<Location>& locations, const Location& target,
                        const KernelSpec& spec);
Vector mean_vector(const std::vector<Location>& locations, const MeanFunction& mean);

// Joint draw of the field at the given locations.
Vector gp_sample(const std::vector<Location>& locations, const GpModel& model, Rng& rng);

// Marginal log-likelihood of per-location averages under
//   ybar ~ N(mean_value * 1, C + noise_var * diag(1/counts))
// with its gradient in (log variance, log lengthscale, log noise_var, mean_value).
struct GpMarginal {
    double log_likelihood = 0.0;
    Eigen::Vector4d gradient = Eigen::Vector4d::Zero();
};
GpMarginal gp_log_marginal(const std::vector<Location>& locations, const Vector& averages,
                           const std::vector<int>& counts, const KernelSpec& kernel,
                           double noise_var, double mean_value);

struct HyperFit {
    GpModel model;          // fitted kernel/noise; mean is the fitted constant
    double mean_value = 0.0;
    double log_likelihood = 0.0;
    int iterations = 0;
};

// Thrown when the hyperparameter optimizer diverges; carries the best iterate.
class FitFailure : public NumericalError {
public:
    FitFailure(const std::string& msg, HyperFit best)
        : NumericalError(msg), best_iterate(std::move(best)) {}
    HyperFit best_iterate;
};

// Maximum marginal likelihood fit of (variance, lengthscale, noise_var, mean)
// on per-location averaged observations.  Positive parameters are optimized in
// log space inside the box [1e-6, 1e6].
HyperFit fit_hyperparameters(const std::vector<Location>& locations,
                             const std::vector<std::vector<double>>& observations,
                             const KernelSpec& init_kernel, double init_noise_var,
                             double init_mean);

}  // namespace fieldrec
