#pragma once

#include <functional>
#include <limits>
#include <vector>

#include "fieldrec/em.hpp"

namespace fieldrec {

struct CemConfig {
    int sample_count = 1000;      // candidates per iteration
    double elite_fraction = 0.01;
    int max_iterations = 50;
    int stall_iterations = 5;     // stop after this many non-improving iterations
    double stall_tolerance = 1e-6;
    std::uint64_t seed = 0;
    void validate() const;
};

struct MapEstimate {
    DistortionParams psi;
    double objective = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    int restarts = 1;
    std::vector<double> trace;  // best objective so far, one entry per iteration/sweep
};

using Objective = std::function<double(const DistortionParams&)>;

// 1-based rank (ascending order statistic) of the elite threshold:
// ceil((1 - elite_fraction) * sample_count).  Scores at or above the
// statistic with this rank form the elite set.
int elite_threshold_rank(int sample_count, double elite_fraction);

// Cross-entropy maximization of the objective over calibration parameters.
// The proposal starts equal to the prior; each iteration draws sample_count
// candidates, keeps those at or above the (1 - elite_fraction) sample
// quantile (the ceil((1-rho)S)-th order statistic), refits the proposal on
// them by EM, floors the proposal weights at 1e-6 (renormalized), and tracks
// the best candidate ever scored.
MapEstimate cem_optimize(const Objective& objective, const MixturePrior& prior,
                         const CemConfig& config);

}  // namespace fieldrec
