#pragma once

#include <string>
#include <vector>

#include "fieldrec/distortion.hpp"
#include "fieldrec/gp.hpp"

namespace fieldrec {

// How the true per-sensor calibrations are generated in synthetic runs:
// round(proportion * N) sensors (chosen at random) distort; the rest stay at
// the default.  `fixed` gives every distorting sensor the same (gain, offset);
// `prior` draws each from the prior's continuous categories with equal
// probability.
struct TruthSpec {
    enum class Mode { fixed, prior };
    Mode mode = Mode::fixed;
    double proportion = 0.5;
    double gain = 1.2;
    double offset = 6.0;
    bool redraw_each_replicate = false;
};

struct PriorSpec {
    struct Component {
        double weight = 0.5;
        double mean_log_gain = 0.25;
        double sd_log_gain = 0.1;
        double mean_offset = 6.0;
        double sd_offset = 3.0;
    };
    double atom_weight = 0.5;
    std::vector<Component> components = {Component{}};

    MixturePrior build(std::size_t n_sensors) const;
};

struct ExperimentConfig {
    int sensors = 100;
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    int grid_nx = 100;
    int grid_ny = 100;
    double mean = 10.0;
    double variance = 100.0;
    double lengthscale = 0.3;
    int obs_per_sensor = 50;
    double snr_db = 15.0;
    int replicates = 30;
    std::vector<std::string> methods = {"oracle", "naive", "sblue"};
    int clusters = 1;
    std::uint64_t seed = 1;
    PriorSpec prior;
    TruthSpec truth;
    int cem_samples = 1000;
    double cem_elite = 0.01;
    int cem_max_iterations = 50;
    int icm_restarts = 5;

    void validate() const;
    GpModel gp_model() const;       // noise variance derived from the SNR setting
    std::string echo() const;       // compact summary for the metrics CSV
};

// Flat key-value config: one `key = value` per line, '#' comments.  Unknown
// keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// "weight:mean_log_gain:sd_log_gain:mean_offset:sd_offset"
PriorSpec::Component parse_prior_component(const std::string& text);

}  // namespace fieldrec
