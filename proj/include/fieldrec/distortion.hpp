#pragma once

#include <vector>

#include "fieldrec/linalg.hpp"
#include "fieldrec/rng.hpp"

namespace fieldrec {

// Gains below this are treated as outside the support (-inf log prior);
// optimizers clamp their iterates here before evaluating.
constexpr double kMinGain = 1e-8;
const double kMinLogGain = std::log(kMinGain);

// One sensor's calibration: reading = gain * (field + noise) + offset.
// is_default marks the exact undistorted state (gain, offset) == (1, 0);
// it is carried as a flag and never inferred by float comparison.
struct SensorParams {
    bool is_default = true;
    double gain = 1.0;
    double offset = 0.0;

    static SensorParams atom() { return {}; }
    static SensorParams continuous(double gain, double offset);
    void validate() const;
};

using DistortionParams = std::vector<SensorParams>;
DistortionParams all_default(std::size_t n_sensors);

// Bivariate normal law on (log gain, offset).
struct MixtureComponent {
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();

    void validate() const;
    double log_density(double log_gain, double offset) const;
    Eigen::Vector2d log_density_grad(double log_gain, double offset) const;

    // closed-form moments of (gain, offset) = (e^u, v), (u,v) ~ N(mean, cov)
    double mean_gain() const;
    double mean_gain_sq() const;
    double mean_offset() const { return mean[1]; }
    double mean_offset_sq() const { return mean[1] * mean[1] + cov(1, 1); }
    double mean_gain_offset() const;
};

// Per-sensor mixture: point mass at the default calibration plus K shared
// continuous components; weight column 0 is the atom weight.
struct MixturePrior {
    Matrix weights;  // n_sensors x (K+1)
    std::vector<MixtureComponent> components;

    std::size_t sensor_count() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t component_count() const { return components.size(); }
    double atom_weight(std::size_t n) const { return weights(static_cast<Eigen::Index>(n), 0); }
    double component_weight(std::size_t n, std::size_t k) const {
        return weights(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    }
    void validate() const;

    static MixturePrior homogeneous(std::size_t n_sensors, double atom_weight,
                                    const std::vector<double>& component_weights,
                                    std::vector<MixtureComponent> comps);
};

// Sufficient statistics of one sensor's observations.
struct SensorSummary {
    Location location = Location::Zero();
    int count = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    double mean() const { return sum / static_cast<double>(count); }
    void validate() const;
};

double apply_distortion(double u, const SensorParams& psi);
SensorSummary summarize(const Location& location, const std::vector<double>& observations);

// Mixed mass/density convention: the prior "log density" is log(atom weight)
// at the default state and the continuous mixture log density on
// (gain, offset) elsewhere (including the 1/gain change of variables from
// (log gain, offset)).  The two branches are dimensionally heterogeneous; the
// estimators compare them directly by design.
double log_prior_sensor(std::size_t n, const SensorParams& psi, const MixturePrior& prior);
double log_prior(const DistortionParams& psi, const MixturePrior& prior);

// Continuous branch only, parameterized by (log gain, offset); equals
// log_prior_sensor for any off-atom state.  Gradient is in the same coords.
double log_prior_continuous(std::size_t n, double log_gain, double offset,
                            const MixturePrior& prior);
Eigen::Vector2d log_prior_continuous_grad(std::size_t n, double log_gain, double offset,
                                          const MixturePrior& prior);

SensorParams sample_prior_sensor(std::size_t n, const MixturePrior& prior, Rng& rng);
DistortionParams sample_prior(const MixturePrior& prior, Rng& rng);

// Draw an off-atom calibration from one component law.
SensorParams sample_component(const MixtureComponent& component, Rng& rng);

}  // namespace fieldrec
