#pragma once

#include <vector>

#include "fieldrec/distortion.hpp"
#include "fieldrec/rng.hpp"

namespace fieldrec {

// Per-sensor proposal family used by the cross-entropy optimizer: an atom
// weight plus K bivariate-normal components on (log gain, offset), all
// sensor-specific (unlike MixturePrior, whose components are shared).
struct SamplerParams {
    Matrix weights;                                         // N x (K+1)
    std::vector<std::vector<MixtureComponent>> components;  // [sensor][k]

    std::size_t sensor_count() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t component_count() const {
        return components.empty() ? 0 : components.front().size();
    }
    void validate() const;

    static SamplerParams from_prior(const MixturePrior& prior);
};

DistortionParams sample_from(const SamplerParams& params, Rng& rng);

// Mixed mass/density log-likelihood of drawn calibrations under the sampler:
// log(atom weight) for default draws, component mixture log density on
// (log gain, offset) otherwise.
double sampler_log_density(const SamplerParams& params, const DistortionParams& psi);
double sampler_log_likelihood(const SamplerParams& params,
                              const std::vector<DistortionParams>& samples);

struct EmOptions {
    int max_iterations = 100;
    double tolerance = 1e-8;  // stop when the log-likelihood gain drops below this
};

struct EmResult {
    SamplerParams params;
    std::vector<double> log_likelihood_trace;  // value after each iteration
};

// Weighted maximum-likelihood refit of the sampler on a set of draws.  Atom
// membership is read from the is_default flag (responsibility exactly 0/1);
// components whose total responsibility is below 1e-8 keep their previous
// parameters; fitted covariances are floored at 1e-8 * I.  Weights are the
// exact maximum-likelihood values (no flooring here).
EmResult em_fit_mixture(const std::vector<DistortionParams>& samples, const SamplerParams& init,
                        const EmOptions& options = {});

}  // namespace fieldrec
