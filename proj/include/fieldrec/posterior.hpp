#pragma once

#include <vector>

#include "fieldrec/distortion.hpp"
#include "fieldrec/gp.hpp"

namespace fieldrec {

struct PredictiveGaussian {
    double mean = 0.0;
    double variance = 0.0;  // in [0, prior variance]
};

// Posterior evaluator for a fixed (sensor locations, counts, field prior)
// configuration.  The latent covariance of the calibrated sensor means,
// Upsilon = C + noise_var * diag(1/M), is factorized once at construction;
// calibration parameters enter only through the calibrated means, so repeated
// evaluations and predictions reuse the factorization.
class CalibrationPosterior {
public:
    CalibrationPosterior(std::vector<SensorSummary> summaries, GpModel gp, MixturePrior prior);

    std::size_t sensor_count() const { return summaries_.size(); }
    const std::vector<SensorSummary>& summaries() const { return summaries_; }
    const GpModel& gp() const { return gp_; }
    const MixturePrior& prior() const { return prior_; }

    // calibrated sensor means: (observed mean_n - offset_n) / gain_n
    Vector calibrated_means(const DistortionParams& psi) const;

    // log p(data | psi), collapsed to the per-sensor sufficient statistics
    double log_likelihood(const DistortionParams& psi) const;
    // log p(data | psi) + log prior(psi); the model-evidence constant is dropped
    double log_posterior(const DistortionParams& psi) const;

    // gradient of log_posterior in (log gain_n, offset_n), stacked [2n, 2n+1];
    // every sensor must be off-atom (the atom is a point mass, not a coordinate)
    Vector log_posterior_gradient(const DistortionParams& psi) const;

    PredictiveGaussian predict(const Location& target, const DistortionParams& psi) const;

    const Vector& prior_mean() const { return mu_; }
    const Matrix& latent_cov() const { return upsilon_; }
    const Eigen::LLT<Matrix>& latent_llt() const { return upsilon_llt_; }
    const Matrix& latent_precision() const { return precision_; }

private:
    std::vector<SensorSummary> summaries_;
    GpModel gp_;
    MixturePrior prior_;
    Vector mu_;             // prior mean at the sensors
    Matrix upsilon_;        // C + noise_var * diag(1/M)
    Eigen::LLT<Matrix> upsilon_llt_;
    Matrix precision_;      // Upsilon^{-1} (leave-one-out conditioning)
    double upsilon_log_det_ = 0.0;
    double psi_free_terms_ = 0.0;  // pieces of the log-likelihood independent of psi
    Vector residual_ss_;    // per sensor: max(0, s - g^2/M)
};

// One-shot conveniences; construct a CalibrationPosterior for repeated use.
double log_posterior_unnorm(const DistortionParams& psi,
                            const std::vector<SensorSummary>& summaries, const GpModel& gp,
                            const MixturePrior& prior);
PredictiveGaussian posterior_predictive(const Location& target,
                                        const std::vector<SensorSummary>& summaries,
                                        const DistortionParams& psi, const GpModel& gp);

}  // namespace fieldrec
