#pragma once

#include "fieldrec/cem.hpp"
#include "fieldrec/posterior.hpp"

namespace fieldrec {

// Leave-one-out conditional moments (nu_n, zeta_n) of the latent field value
// at sensor n given the other sensors' calibrated means: nu_n is the
// conditional mean, zeta_n the noise-free conditional variance.  They depend
// on psi only through the *other* sensors' entries.
std::pair<double, double> icm_conditional_stats(std::size_t n, const CalibrationPosterior& post,
                                                const DistortionParams& psi);
std::pair<double, double> icm_conditional_stats(std::size_t n,
                                                const std::vector<SensorSummary>& summaries,
                                                const GpModel& gp, const DistortionParams& psi);

// log p(sensor n's observations | everyone else's observations, psi): the
// conditional likelihood of one sensor's data given its calibration and the
// leave-one-out moments.  Gains below the numeric floor give -inf.
double icm_conditional_loglik(const SensorParams& psi_n, double nu, double zeta,
                              const SensorSummary& summary, double noise_var);
// gradient in (log gain, offset)
Eigen::Vector2d icm_conditional_loglik_grad(const SensorParams& psi_n, double nu, double zeta,
                                            const SensorSummary& summary, double noise_var);

struct IcmOptions {
    int max_sweeps = 50;
    double tolerance = 1e-8;      // minimum conditional improvement to accept a move
    int max_cg_iterations = 100;  // inner conjugate-gradient budget per sensor
};

// Coordinate-wise MAP search: per sweep and sensor, maximize the conditional
// log-posterior over (log gain, offset) by Polak-Ribiere conjugate gradient,
// then compare against the default-calibration atom; keeps whichever of
// {current value, atom, continuous optimum} scores best.  Restart initial
// states are drawn from the prior; the best restart is returned.
MapEstimate icm_optimize(const std::vector<SensorSummary>& summaries, const GpModel& gp,
                         const MixturePrior& prior, int restarts, Rng& rng,
                         const IcmOptions& options = {});

}  // namespace fieldrec
