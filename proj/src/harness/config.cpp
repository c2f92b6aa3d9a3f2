#include "fieldrec/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fieldrec/harness/synth.hpp"

namespace fieldrec {
namespace {

const std::vector<std::string> kKnownMethods = {"oracle",  "naive",   "sblue",  "cem",
                                                "icm",     "ds-blue", "deb-cem", "deb-icm"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("config: bad number for '" + key + "': " + v);
    }
}

long long parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw std::invalid_argument("config: bad integer for '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw std::invalid_argument("config: bad boolean for '" + key + "': " + v);
}

}  // namespace

PriorSpec::Component parse_prior_component(const std::string& text) {
    const auto parts = split(text, ':');
    if (parts.size() != 5)
        throw std::invalid_argument(
            "prior component '" + text +
            "' wants weight:mean_log_gain:sd_log_gain:mean_offset:sd_offset");
    PriorSpec::Component c;
    c.weight = parse_double("prior component", parts[0]);
    c.mean_log_gain = parse_double("prior component", parts[1]);
    c.sd_log_gain = parse_double("prior component", parts[2]);
    c.mean_offset = parse_double("prior component", parts[3]);
    c.sd_offset = parse_double("prior component", parts[4]);
    return c;
}

MixturePrior PriorSpec::build(std::size_t n_sensors) const {
    std::vector<MixtureComponent> comps;
    std::vector<double> weights;
    for (const auto& c : components) {
        MixtureComponent mc;
        mc.mean = Eigen::Vector2d(c.mean_log_gain, c.mean_offset);
        mc.cov = Eigen::Vector2d(c.sd_log_gain * c.sd_log_gain, c.sd_offset * c.sd_offset)
                     .asDiagonal();
        comps.push_back(mc);
        weights.push_back(c.weight);
    }
    return MixturePrior::homogeneous(n_sensors, atom_weight, weights, std::move(comps));
}

void ExperimentConfig::validate() const {
    if (sensors < 1) throw std::invalid_argument("config: sensors must be >= 1");
    if (!(domain_hi > domain_lo)) throw std::invalid_argument("config: empty domain");
    if (grid_nx < 1 || grid_ny < 1) throw std::invalid_argument("config: bad grid");
    if (!(variance > 0.0) || !(lengthscale > 0.0))
        throw std::invalid_argument("config: kernel parameters must be positive");
    if (obs_per_sensor < 1) throw std::invalid_argument("config: obs_per_sensor must be >= 1");
    if (replicates < 1) throw std::invalid_argument("config: replicates must be >= 1");
    if (clusters < 1 || clusters > sensors)
        throw std::invalid_argument("config: clusters must be in [1, sensors]");
    if (!(truth.proportion >= 0.0 && truth.proportion <= 1.0))
        throw std::invalid_argument("config: proportion must be in [0, 1]");
    if (truth.mode == TruthSpec::Mode::fixed && !(truth.gain > 0.0))
        throw std::invalid_argument("config: truth gain must be positive");
    if (methods.empty()) throw std::invalid_argument("config: no methods selected");
    for (const auto& m : methods)
        if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end())
            throw std::invalid_argument("config: unknown method '" + m + "'");
    if (truth.mode == TruthSpec::Mode::prior && prior.components.empty())
        throw std::invalid_argument("config: truth_mode=prior needs prior components");
    prior.build(static_cast<std::size_t>(sensors)).validate();
    if (icm_restarts < 1) throw std::invalid_argument("config: icm_restarts must be >= 1");
}

GpModel ExperimentConfig::gp_model() const {
    GpModel gp;
    gp.mean = constant_mean(mean);
    gp.kernel = KernelSpec{variance, lengthscale};
    gp.noise_var = snr_to_noise_var(snr_db, obs_per_sensor, variance);
    return gp;
}

std::string ExperimentConfig::echo() const {
    std::ostringstream os;
    os << "sensors=" << sensors << ";M=" << obs_per_sensor << ";snr_db=" << snr_db
       << ";proportion=" << truth.proportion << ";truth="
       << (truth.mode == TruthSpec::Mode::fixed
               ? "fixed(" + std::to_string(truth.gain) + "|" + std::to_string(truth.offset) + ")"
               : std::string("prior"))
       << ";clusters=" << clusters << ";seed=" << seed;
    return os.str();
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::map<int, PriorSpec::Component> prior_comps;
    bool prior_touched = false;

    std::stringstream ss(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(ss, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        const std::string line = trim(raw);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw std::invalid_argument("config line " + std::to_string(line_no) +
                                        ": empty key or value");

        if (key == "sensors") cfg.sensors = static_cast<int>(parse_int(key, value));
        else if (key == "domain_lo") cfg.domain_lo = parse_double(key, value);
        else if (key == "domain_hi") cfg.domain_hi = parse_double(key, value);
        else if (key == "grid_nx") cfg.grid_nx = static_cast<int>(parse_int(key, value));
        else if (key == "grid_ny") cfg.grid_ny = static_cast<int>(parse_int(key, value));
        else if (key == "mean") cfg.mean = parse_double(key, value);
        else if (key == "variance") cfg.variance = parse_double(key, value);
        else if (key == "lengthscale") cfg.lengthscale = parse_double(key, value);
        else if (key == "obs_per_sensor") cfg.obs_per_sensor = static_cast<int>(parse_int(key, value));
        else if (key == "snr_db") cfg.snr_db = parse_double(key, value);
        else if (key == "replicates") cfg.replicates = static_cast<int>(parse_int(key, value));
        else if (key == "methods") cfg.methods = split(value, ',');
        else if (key == "clusters") cfg.clusters = static_cast<int>(parse_int(key, value));
        else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
        else if (key == "prior_atom_weight") {
            cfg.prior.atom_weight = parse_double(key, value);
            prior_touched = true;
        } else if (key.rfind("prior_component_", 0) == 0) {
            const int idx = static_cast<int>(parse_int(key, key.substr(16)));
            prior_comps[idx] = parse_prior_component(value);
            prior_touched = true;
        } else if (key == "truth_mode") {
            if (value == "fixed") cfg.truth.mode = TruthSpec::Mode::fixed;
            else if (value == "prior") cfg.truth.mode = TruthSpec::Mode::prior;
            else throw std::invalid_argument("config: truth_mode must be fixed or prior");
        } else if (key == "proportion") cfg.truth.proportion = parse_double(key, value);
        else if (key == "truth_gain") cfg.truth.gain = parse_double(key, value);
        else if (key == "truth_offset") cfg.truth.offset = parse_double(key, value);
        else if (key == "redraw_distortion") cfg.truth.redraw_each_replicate = parse_bool(key, value);
        else if (key == "cem_samples") cfg.cem_samples = static_cast<int>(parse_int(key, value));
        else if (key == "cem_elite") cfg.cem_elite = parse_double(key, value);
        else if (key == "cem_max_iterations") cfg.cem_max_iterations = static_cast<int>(parse_int(key, value));
        else if (key == "icm_restarts") cfg.icm_restarts = static_cast<int>(parse_int(key, value));
        else throw std::invalid_argument("config line " + std::to_string(line_no) +
                                         ": unknown key '" + key + "'");
    }

    if (!prior_comps.empty()) {
        cfg.prior.components.clear();
        int expect = 1;
        for (const auto& [idx, comp] : prior_comps) {
            if (idx != expect)
                throw std::invalid_argument("config: prior components must be numbered 1..K");
            cfg.prior.components.push_back(comp);
            ++expect;
        }
    } else if (prior_touched) {
        // atom weight changed with the default single component: rebalance it
        cfg.prior.components[0].weight = 1.0 - cfg.prior.atom_weight;
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

}  // namespace fieldrec
