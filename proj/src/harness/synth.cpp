#include "fieldrec/harness/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fieldrec {

double snr_to_noise_var(double snr_db, int obs_per_sensor, double signal_var) {
    if (obs_per_sensor < 1) throw std::invalid_argument("snr_to_noise_var: M must be >= 1");
    if (!(signal_var > 0.0)) throw std::invalid_argument("snr_to_noise_var: signal_var must be > 0");
    return obs_per_sensor * signal_var / std::pow(10.0, snr_db / 10.0);
}

std::vector<Location> make_grid(double lo1, double hi1, double lo2, double hi2, int nx, int ny) {
    if (nx < 1 || ny < 1) throw std::invalid_argument("make_grid: need nx, ny >= 1");
    if (!(hi1 >= lo1) || !(hi2 >= lo2)) throw std::invalid_argument("make_grid: empty domain");
    const auto coord = [](double lo, double hi, int i, int n) {
        return n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
    };
    std::vector<Location> grid;
    grid.reserve(static_cast<std::size_t>(nx) * ny);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix)
            grid.emplace_back(coord(lo1, hi1, ix, nx), coord(lo2, hi2, iy, ny));
    return grid;
}

std::vector<Location> make_grid(double lo, double hi, int nx, int ny) {
    return make_grid(lo, hi, lo, hi, nx, ny);
}

std::vector<Location> place_sensors(int n, double lo, double hi, Rng& rng) {
    std::vector<Location> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        const double x1 = rng.uniform(lo, hi);
        const double x2 = rng.uniform(lo, hi);
        out.emplace_back(x1, x2);
    }
    return out;
}

Vector sample_field(const GpModel& gp, const std::vector<Location>& locations, Rng& rng) {
    return gp_sample(locations, gp, rng);
}

DistortionParams sample_truth(const TruthSpec& truth, const PriorSpec& prior, int n_sensors,
                              Rng& rng) {
    DistortionParams psi = all_default(n_sensors);
    const int n_distort =
        static_cast<int>(std::lround(truth.proportion * static_cast<double>(n_sensors)));
    if (n_distort == 0) return psi;

    // partial Fisher-Yates: the first n_distort entries are the chosen sensors
    std::vector<int> order(n_sensors);
    for (int i = 0; i < n_sensors; ++i) order[i] = i;
    for (int i = 0; i < n_distort; ++i) {
        const std::size_t j = i + rng.uniform_index(n_sensors - i);
        std::swap(order[i], order[j]);
    }
    std::vector<int> chosen(order.begin(), order.begin() + n_distort);
    std::sort(chosen.begin(), chosen.end());

    if (truth.mode == TruthSpec::Mode::fixed) {
        for (int n : chosen) psi[n] = SensorParams::continuous(truth.gain, truth.offset);
        return psi;
    }

    // prior mode: equal category probabilities over the continuous components
    if (prior.components.empty())
        throw std::invalid_argument("sample_truth: prior mode needs mixture components");
    std::vector<MixtureComponent> comps;
    for (const auto& c : prior.components) {
        MixtureComponent mc;
        mc.mean = Eigen::Vector2d(c.mean_log_gain, c.mean_offset);
        mc.cov =
            Eigen::Vector2d(c.sd_log_gain * c.sd_log_gain, c.sd_offset * c.sd_offset).asDiagonal();
        comps.push_back(mc);
    }
    for (int n : chosen) {
        const std::size_t k = rng.uniform_index(comps.size());
        psi[n] = sample_component(comps[k], rng);
    }
    return psi;
}

ObservationSet sample_observations(const std::vector<Location>& sensors,
                                   const Vector& field_at_sensors, const DistortionParams& psi,
                                   int obs_per_sensor, double noise_var, Rng& rng) {
    const std::size_t n = sensors.size();
    if (static_cast<std::size_t>(field_at_sensors.size()) != n || psi.size() != n)
        throw std::invalid_argument("sample_observations: size mismatch");
    if (obs_per_sensor < 1) throw std::invalid_argument("sample_observations: M must be >= 1");
    if (!(noise_var >= 0.0)) throw std::invalid_argument("sample_observations: bad noise_var");

    const double sd = std::sqrt(noise_var);
    ObservationSet out;
    out.raw.resize(n);
    out.summaries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& readings = out.raw[i];
        readings.reserve(obs_per_sensor);
        for (int m = 0; m < obs_per_sensor; ++m)
            readings.push_back(apply_distortion(field_at_sensors[i] + sd * rng.normal(), psi[i]));
        out.summaries.push_back(summarize(sensors[i], readings));
    }
    return out;
}

SyntheticWorld generate_world(const ExperimentConfig& cfg, const Rng& rng) {
    cfg.validate();
    SyntheticWorld world;
    Rng placement = rng.fork(streams::placement);
    Rng field = rng.fork(streams::field);
    Rng truth = rng.fork(streams::truth);
    Rng noise = rng.fork(streams::noise);

    world.sensors = place_sensors(cfg.sensors, cfg.domain_lo, cfg.domain_hi, placement);
    world.grid = make_grid(cfg.domain_lo, cfg.domain_hi, cfg.grid_nx, cfg.grid_ny);

    std::vector<Location> all = world.sensors;
    all.insert(all.end(), world.grid.begin(), world.grid.end());
    const GpModel gp = cfg.gp_model();
    const Vector joint = sample_field(gp, all, field);
    world.field_sensors = joint.head(cfg.sensors);
    world.field_grid = joint.tail(static_cast<Eigen::Index>(world.grid.size()));

    world.truth = sample_truth(cfg.truth, cfg.prior, cfg.sensors, truth);
    world.observations = sample_observations(world.sensors, world.field_sensors, world.truth,
                                             cfg.obs_per_sensor, gp.noise_var, noise);
    return world;
}

}  // namespace fieldrec
