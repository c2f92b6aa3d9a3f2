#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fieldrec/harness/config.hpp"
#include "fieldrec/harness/metrics.hpp"
#include "fieldrec/harness/synth.hpp"

namespace fieldrec {

struct ExperimentResult {
    std::vector<MetricsRow> rows;
    SyntheticWorld world;  // replicate-0 world (placement, field, truth, observations)
};

using ProgressFn = std::function<void(const std::string&)>;

// Runs every configured method on every replicate.  Placement and field are
// drawn once; observation noise (and, when configured, the true distortion
// state) is redrawn per replicate.  Per-method failures are recorded in the
// row's status column and the run continues.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

}  // namespace fieldrec
