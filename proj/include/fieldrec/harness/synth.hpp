#pragma once

#include <vector>

#include "fieldrec/distortion.hpp"
#include "fieldrec/gp.hpp"
#include "fieldrec/harness/config.hpp"
#include "fieldrec/rng.hpp"

namespace fieldrec {

// Stream ids forked off the master seed; replicate-dependent streams add the
// replicate index so replicates are independent and order-insensitive.
namespace streams {
inline constexpr std::uint64_t placement = 1;
inline constexpr std::uint64_t field = 2;
inline constexpr std::uint64_t truth = 3;
inline constexpr std::uint64_t noise = 1'000'000;
inline constexpr std::uint64_t redraw = 2'000'000;
inline constexpr std::uint64_t cem = 3'000'000;
inline constexpr std::uint64_t icm = 4'000'000;
inline constexpr std::uint64_t deb_cem = 5'000'000;
inline constexpr std::uint64_t deb_icm = 6'000'000;
}  // namespace streams

// Per-reading noise variance that yields the requested SNR on the
// aggregated (averaged) observation of a sensor taking M readings.
double snr_to_noise_var(double snr_db, int obs_per_sensor, double signal_var);

// Regular grid, x1 varying fastest, endpoints included.
std::vector<Location> make_grid(double lo1, double hi1, double lo2, double hi2, int nx, int ny);
std::vector<Location> make_grid(double lo, double hi, int nx, int ny);  // square domain

std::vector<Location> place_sensors(int n, double lo, double hi, Rng& rng);

// One joint draw of the latent field over an arbitrary location set.
Vector sample_field(const GpModel& gp, const std::vector<Location>& locations, Rng& rng);

// True distortion state: round(proportion * N) sensors distort, the rest
// stay default.  Fixed mode gives every distorting sensor the same (gain,
// offset); prior mode draws each from the continuous mixture components
// with equal category probabilities.
DistortionParams sample_truth(const TruthSpec& truth, const PriorSpec& prior, int n_sensors,
                              Rng& rng);

struct ObservationSet {
    std::vector<std::vector<double>> raw;  // [sensor][reading]
    std::vector<SensorSummary> summaries;
};

ObservationSet sample_observations(const std::vector<Location>& sensors,
                                   const Vector& field_at_sensors, const DistortionParams& psi,
                                   int obs_per_sensor, double noise_var, Rng& rng);

struct SyntheticWorld {
    std::vector<Location> sensors;
    std::vector<Location> grid;
    Vector field_sensors;
    Vector field_grid;
    DistortionParams truth;
    ObservationSet observations;
};

// Fixed streams are forked off `rng` so placement, field, truth, and noise
// are individually reproducible.
SyntheticWorld generate_world(const ExperimentConfig& cfg, const Rng& rng);

}  // namespace fieldrec
