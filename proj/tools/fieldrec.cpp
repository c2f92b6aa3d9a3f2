#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fieldrec/cem.hpp"
#include "fieldrec/distributed.hpp"
#include "fieldrec/geo.hpp"
#include "fieldrec/harness/config.hpp"
#include "fieldrec/harness/csv.hpp"
#include "fieldrec/harness/experiment.hpp"
#include "fieldrec/harness/synth.hpp"
#include "fieldrec/icm.hpp"
#include "fieldrec/posterior.hpp"
#include "fieldrec/sblue.hpp"

namespace {

using namespace fieldrec;

// Writes to the given path, or stdout when the path is empty.
class OutFile {
public:
    explicit OutFile(const std::string& path) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw std::invalid_argument("cannot open output file: " + path);
        }
    }
    std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    return in;
}

std::string csv_safe(std::string s) {
    std::replace(s.begin(), s.end(), ',', ';');
    return s;
}

// ---------------------------------------------------------------- synth ----

struct SynthOpts {
    std::string config_path;
    std::string out;
    std::string dump_prefix;
    std::optional<std::uint64_t> seed;
    std::optional<int> replicates;
    bool quiet = false;
};

void run_synth(const SynthOpts& o) {
    ExperimentConfig cfg =
        o.config_path.empty() ? ExperimentConfig{} : load_config_file(o.config_path);
    if (o.seed) cfg.seed = *o.seed;
    if (o.replicates) cfg.replicates = *o.replicates;
    cfg.validate();

    ProgressFn progress;
    if (!o.quiet) progress = [](const std::string& msg) { std::cerr << msg << '\n'; };
    const ExperimentResult result = run_experiment(cfg, progress);

    OutFile out(o.out);
    write_metrics_csv(out.stream(), result.rows);

    if (!o.dump_prefix.empty()) {
        const SyntheticWorld& world = result.world;
        std::vector<std::string> ids;
        for (int i = 1; i <= cfg.sensors; ++i) ids.push_back(std::to_string(i));

        SensorData data;
        data.ids = ids;
        data.locations = world.sensors;
        data.observations = world.observations.raw;
        OutFile obs(o.dump_prefix + "observations.csv");
        write_observations_csv(obs.stream(), data);

        OutFile locs(o.dump_prefix + "locations.csv");
        write_locations_csv(locs.stream(), NamedLocations{ids, world.sensors}, false);

        OutFile psi(o.dump_prefix + "psi.csv");
        write_psi_csv(psi.stream(), ids, world.truth);

        std::vector<bool> flags(world.truth.size());
        for (std::size_t i = 0; i < world.truth.size(); ++i) flags[i] = !world.truth[i].is_default;
        OutFile flagf(o.dump_prefix + "flags.csv");
        write_flags_csv(flagf.stream(), ids, flags);

        // grid artifact: truth plus the replicate-0 oracle reconstruction
        const CalibrationPosterior post(world.observations.summaries, cfg.gp_model(),
                                        cfg.prior.build(cfg.sensors));
        GridTable table;
        table.points = world.grid;
        table.truth = world.field_grid;
        table.estimate.resize(static_cast<Eigen::Index>(world.grid.size()));
        Vector pvar(static_cast<Eigen::Index>(world.grid.size()));
        for (std::size_t i = 0; i < world.grid.size(); ++i) {
            const PredictiveGaussian pred = post.predict(world.grid[i], world.truth);
            table.estimate[static_cast<Eigen::Index>(i)] = pred.mean;
            pvar[static_cast<Eigen::Index>(i)] = pred.variance;
        }
        table.predictive_var = pvar;
        OutFile gridf(o.dump_prefix + "grid.csv");
        write_grid_csv(gridf.stream(), table);
    }
}

// ---------------------------------------------------------- data loading ----

struct DataOpts {
    std::string obs_path;
    std::string format = "plain";
    bool lonlat = false;
    bool no_fahrenheit = false;
    double min_value = -17.88;
    double max_value = 60.0;
    std::string date_prefix;
};

SensorData load_data(const DataOpts& o) {
    auto in = open_in(o.obs_path);
    if (o.format == "plain") return read_observations_csv(in);

    IngestOptions opts;
    opts.fahrenheit = !o.no_fahrenheit;
    opts.min_value = o.min_value;
    opts.max_value = o.max_value;
    opts.date_prefix = o.date_prefix;
    IngestResult res = ingest_epa_csv(in, opts);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
    std::cerr << "ingest: sites=" << res.data.size() << " rows=" << res.rows_read
              << " kept=" << res.kept << " outliers=" << res.outliers
              << " duplicates=" << res.duplicates << " malformed=" << res.malformed
              << " missing_fraction=" << res.missing_fraction << '\n';
    return std::move(res.data);
}

bool uses_lonlat(const DataOpts& o) { return o.lonlat || o.format == "epa"; }

// ------------------------------------------------------------ hyper file ----

std::map<std::string, double> read_hyper_file(const std::string& path) {
    auto in = open_in(path);
    std::map<std::string, double> values;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r\n");
            if (b == std::string::npos) return std::string();
            const auto e = s.find_last_not_of(" \t\r\n");
            return s.substr(b, e - b + 1);
        };
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key.empty() || value.empty()) continue;
        try {
            values[key] = std::stod(value);
        } catch (...) {
            throw std::invalid_argument("hyper file: bad value for '" + key + "'");
        }
    }
    return values;
}

struct HyperOpts {
    std::string hyper_path;
    std::optional<double> mean, variance, lengthscale, noise_var, snr_db;
    std::optional<int> snr_m;
};

GpModel resolve_gp(const HyperOpts& o, const SensorData& data) {
    std::map<std::string, double> file;
    if (!o.hyper_path.empty()) file = read_hyper_file(o.hyper_path);
    auto pick = [&](const char* key, const std::optional<double>& flag) -> std::optional<double> {
        if (flag) return flag;
        const auto it = file.find(key);
        if (it != file.end()) return it->second;
        return std::nullopt;
    };
    auto need = [&](const char* key, const std::optional<double>& flag) {
        const auto v = pick(key, flag);
        if (!v)
            throw std::invalid_argument(std::string("missing hyperparameter '") + key +
                                        "'; pass the flag or a --hyper file");
        return *v;
    };
    GpModel gp;
    const double mean = need("mean", o.mean);
    const double variance = need("variance", o.variance);
    const double lengthscale = need("lengthscale", o.lengthscale);
    double noise_var;
    if (o.noise_var) {
        noise_var = *o.noise_var;
    } else if (o.snr_db) {
        int m = 0;
        if (o.snr_m) {
            m = *o.snr_m;
        } else {
            double total = 0.0;
            for (const auto& obs : data.observations) total += static_cast<double>(obs.size());
            m = std::max(1, static_cast<int>(std::lround(total / data.size())));
        }
        noise_var = snr_to_noise_var(*o.snr_db, m, variance);
    } else if (file.count("noise_var")) {
        noise_var = file.at("noise_var");
    } else {
        throw std::invalid_argument("missing noise level: pass --noise-var, --snr-db, or a --hyper file");
    }
    gp.mean = constant_mean(mean);
    gp.kernel = KernelSpec{variance, lengthscale};
    gp.noise_var = noise_var;
    gp.validate();
    return gp;
}

// ------------------------------------------------------------ reconstruct ----

struct PriorOpts {
    double atom_weight = 0.5;
    std::vector<std::string> components;  // "w:mla:sla:mb:sb"
};

MixturePrior build_prior(const PriorOpts& o, std::size_t n_sensors) {
    PriorSpec spec;
    spec.atom_weight = o.atom_weight;
    if (!o.components.empty()) {
        spec.components.clear();
        for (const auto& text : o.components) spec.components.push_back(parse_prior_component(text));
    } else {
        spec.components[0].weight = 1.0 - o.atom_weight;
    }
    return spec.build(n_sensors);
}

struct ReconOpts {
    DataOpts data;
    HyperOpts hyper;
    PriorOpts prior;
    std::string method = "sblue";
    int clusters = 1;
    int grid_nx = 100;
    int grid_ny = 100;
    std::vector<double> x1_range, x2_range;  // empty or [lo, hi]
    std::string truth_grid;
    std::string out, psi_out, flags_out, partition_out;
    int cem_samples = 1000;
    double cem_elite = 0.01;
    int cem_max_iterations = 50;
    int icm_restarts = 5;
    std::uint64_t seed = 1;
};

std::pair<double, double> axis_range(const std::vector<double>& flag,
                                     const std::vector<Location>& pts, int axis) {
    if (!flag.empty()) {
        if (flag.size() != 2 || !(flag[0] < flag[1]))
            throw std::invalid_argument("axis range wants LO HI with LO < HI");
        return {flag[0], flag[1]};
    }
    double lo = pts[0][axis], hi = pts[0][axis];
    for (const auto& p : pts) {
        lo = std::min(lo, p[axis]);
        hi = std::max(hi, p[axis]);
    }
    if (lo == hi) {  // degenerate extent: pad so the grid has area
        lo -= 0.5;
        hi += 0.5;
    }
    return {lo, hi};
}

DistortionParams fit_psi(const std::string& method, const CalibrationPosterior& post,
                         const MixturePrior& prior, const ReconOpts& o, std::uint64_t seed) {
    if (method == "cem") {
        CemConfig cc;
        cc.sample_count = o.cem_samples;
        cc.elite_fraction = o.cem_elite;
        cc.max_iterations = o.cem_max_iterations;
        cc.seed = seed;
        return cem_optimize([&](const DistortionParams& p) { return post.log_posterior(p); },
                            prior, cc)
            .psi;
    }
    Rng rng(seed);
    return icm_optimize(post.summaries(), post.gp(), prior, o.icm_restarts, rng).psi;
}

void run_reconstruct(const ReconOpts& o) {
    const SensorData data = load_data(o.data);
    const bool lonlat = uses_lonlat(o.data);
    const std::size_t n = data.size();

    std::optional<EquirectangularProjection> proj;
    std::vector<Location> planar = data.locations;
    if (lonlat) {
        proj.emplace(EquirectangularProjection::about_centroid(data.locations));
        planar = proj->to_plane_km(data.locations);
    }

    std::vector<SensorSummary> summaries;
    std::vector<int> counts;
    for (std::size_t i = 0; i < n; ++i) {
        summaries.push_back(summarize(planar[i], data.observations[i]));
        counts.push_back(static_cast<int>(data.observations[i].size()));
    }

    const GpModel gp = resolve_gp(o.hyper, data);
    const MixturePrior prior = build_prior(o.prior, n);

    const auto [lo1, hi1] = axis_range(o.x1_range, planar, 0);
    const auto [lo2, hi2] = axis_range(o.x2_range, planar, 1);
    const std::vector<Location> grid = make_grid(lo1, hi1, lo2, hi2, o.grid_nx, o.grid_ny);
    const auto g = static_cast<Eigen::Index>(grid.size());

    Vector estimate(g), pvar(g);
    std::optional<DistortionParams> psi_out;
    std::optional<ClusterPartition> partition;

    if (o.clusters > 1) {
        if (o.method != "sblue" && o.method != "cem" && o.method != "icm")
            throw std::invalid_argument("--clusters > 1 supports methods sblue, cem, icm");
        if (lonlat) {
            partition = cluster_sensors(data.locations, o.clusters);
        } else {
            Matrix dist(n, n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) dist(i, j) = (planar[i] - planar[j]).norm();
            partition = complete_linkage(dist, o.clusters).partition;
        }
        const auto members = partition->members();
        const std::size_t n_clusters = members.size();

        std::vector<std::vector<Vector>> local(2);  // [0]=estimates, [1]=qualities
        local[0].resize(n_clusters);
        local[1].resize(n_clusters);
        DistortionParams full_psi = all_default(n);
        for (std::size_t c = 0; c < n_clusters; ++c) {
            std::vector<Location> locs;
            std::vector<SensorSummary> subs;
            std::vector<int> cnts;
            for (std::size_t i : members[c]) {
                locs.push_back(planar[i]);
                subs.push_back(summaries[i]);
                cnts.push_back(counts[i]);
            }
            const MixturePrior local_prior = build_prior(o.prior, members[c].size());
            local[0][c].resize(g);
            local[1][c].resize(g);
            if (o.method == "sblue") {
                const SblueSolver solver(locs, gp, local_prior, cnts);
                for (Eigen::Index i = 0; i < g; ++i) {
                    const SblueModel model = solver.fit(grid[i]);
                    local[0][c][i] = sblue_predict(model, subs);
                    local[1][c][i] = model.risk;
                }
            } else {
                const CalibrationPosterior post(subs, gp, local_prior);
                const DistortionParams psi_c =
                    fit_psi(o.method, post, local_prior, o, Rng(o.seed).fork(c).seed());
                for (std::size_t j = 0; j < members[c].size(); ++j)
                    full_psi[members[c][j]] = psi_c[j];
                for (Eigen::Index i = 0; i < g; ++i) {
                    const PredictiveGaussian pred = post.predict(grid[i], psi_c);
                    local[0][c][i] = pred.mean;
                    local[1][c][i] = pred.variance;
                }
            }
        }
        for (Eigen::Index i = 0; i < g; ++i) {
            std::vector<LocalEstimate> locals;
            for (std::size_t c = 0; c < n_clusters; ++c)
                locals.push_back({static_cast<int>(c) + 1, local[0][c][i], local[1][c][i]});
            if (o.method == "sblue") {
                const auto fused = dsblue_fuse(locals);
                estimate[i] = fused.first;
                pvar[i] = fused.second;
            } else {
                estimate[i] = deb_fuse(locals);
                double q = locals[0].quality;
                for (const auto& l : locals) q = std::min(q, l.quality);
                pvar[i] = q;
            }
        }
        if (o.method != "sblue") psi_out = full_psi;
    } else if (o.method == "sblue") {
        const SblueSolver solver(planar, gp, prior, counts);
        for (Eigen::Index i = 0; i < g; ++i) {
            const SblueModel model = solver.fit(grid[i]);
            estimate[i] = sblue_predict(model, summaries);
            pvar[i] = model.risk;
        }
    } else if (o.method == "naive" || o.method == "cem" || o.method == "icm") {
        const CalibrationPosterior post(summaries, gp, prior);
        DistortionParams psi = all_default(n);
        if (o.method != "naive") {
            psi = fit_psi(o.method, post, prior, o, o.seed);
            psi_out = psi;
        }
        for (Eigen::Index i = 0; i < g; ++i) {
            const PredictiveGaussian pred = post.predict(grid[i], psi);
            estimate[i] = pred.mean;
            pvar[i] = pred.variance;
        }
    } else {
        throw std::invalid_argument("unknown method '" + o.method +
                                    "' (want naive, sblue, cem, or icm)");
    }

    GridTable table;
    table.points = grid;
    if (lonlat)
        for (auto& p : table.points) p = proj->to_lonlat(p);
    table.estimate = estimate;
    table.predictive_var = pvar;
    if (!o.truth_grid.empty()) {
        auto tin = open_in(o.truth_grid);
        const GridTable ref = read_grid_csv(tin);
        if (ref.points.size() != grid.size())
            throw std::invalid_argument("--truth-grid size does not match the output grid");
        for (std::size_t i = 0; i < grid.size(); ++i)
            if ((ref.points[i] - table.points[i]).norm() > 1e-9)
                throw std::invalid_argument("--truth-grid points do not match the output grid");
        table.truth = ref.truth ? *ref.truth : ref.estimate;
    }
    OutFile out(o.out);
    write_grid_csv(out.stream(), table);

    if (!o.psi_out.empty()) {
        if (!psi_out) throw std::invalid_argument("--psi-out needs method cem or icm");
        OutFile f(o.psi_out);
        write_psi_csv(f.stream(), data.ids, *psi_out);
    }
    if (!o.flags_out.empty()) {
        if (!psi_out) throw std::invalid_argument("--flags-out needs method cem or icm");
        std::vector<bool> flags(n);
        for (std::size_t i = 0; i < n; ++i) flags[i] = !(*psi_out)[i].is_default;
        OutFile f(o.flags_out);
        write_flags_csv(f.stream(), data.ids, flags);
    }
    if (!o.partition_out.empty()) {
        if (!partition) throw std::invalid_argument("--partition-out needs --clusters > 1");
        OutFile f(o.partition_out);
        write_partition_csv(f.stream(), data.ids, *partition);
    }
}

// -------------------------------------------------------------- cluster ----

struct ClusterOpts {
    std::string locations_path;
    int clusters = 1;
    bool lonlat = false;
    std::string out;
};

void run_cluster(const ClusterOpts& o) {
    auto in = open_in(o.locations_path);
    const NamedLocations locs = read_locations_csv(in);
    ClusterPartition partition;
    if (o.lonlat) {
        partition = cluster_sensors(locs.coords, o.clusters);
    } else {
        const auto n = locs.coords.size();
        Matrix dist(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                dist(i, j) = (locs.coords[i] - locs.coords[j]).norm();
        partition = complete_linkage(dist, o.clusters).partition;
    }
    OutFile out(o.out);
    write_partition_csv(out.stream(), locs.ids, partition);
}

// ------------------------------------------------------------- fit-hyper ----

struct FitHyperOpts {
    DataOpts data;
    std::optional<double> init_mean, init_variance, init_lengthscale, init_noise_var;
    std::string out;
};

void run_fit_hyper(const FitHyperOpts& o) {
    const SensorData data = load_data(o.data);
    std::vector<Location> planar = data.locations;
    if (uses_lonlat(o.data))
        planar = EquirectangularProjection::about_centroid(data.locations).to_plane_km(planar);

    const std::size_t n = data.size();
    Vector means(static_cast<Eigen::Index>(n));
    double within = 0.0;
    int within_terms = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& obs = data.observations[i];
        double s = 0.0;
        for (double v : obs) s += v;
        means[static_cast<Eigen::Index>(i)] = s / obs.size();
        if (obs.size() > 1) {
            double ss = 0.0;
            for (double v : obs) ss += (v - means[static_cast<Eigen::Index>(i)]) *
                                       (v - means[static_cast<Eigen::Index>(i)]);
            within += ss / (obs.size() - 1);
            ++within_terms;
        }
    }
    const double mean0 = o.init_mean.value_or(means.mean());
    const double var_of_means =
        (means.array() - means.mean()).square().sum() / std::max<std::size_t>(1, n - 1);
    const double var0 = o.init_variance.value_or(std::max(var_of_means, 1e-6));

    double len0;
    if (o.init_lengthscale) {
        len0 = *o.init_lengthscale;
    } else {
        std::vector<double> dists;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) dists.push_back((planar[i] - planar[j]).norm());
        if (dists.empty()) throw std::invalid_argument("fit-hyper: need at least two sensors");
        std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
        len0 = std::max(dists[dists.size() / 2], 1e-6);
    }
    const double noise0 =
        o.init_noise_var.value_or(within_terms > 0 ? std::max(within / within_terms, 1e-6)
                                                   : 0.1 * var0);

    HyperFit fit;
    try {
        fit = fit_hyperparameters(planar, data.observations, KernelSpec{var0, len0}, noise0, mean0);
    } catch (const FitFailure& e) {
        std::cerr << "fit diverged: " << e.what() << "; best iterate follows\n";
        const HyperFit& best = e.best_iterate;
        std::cerr << "mean=" << best.mean_value << " variance=" << best.model.kernel.variance
                  << " lengthscale=" << best.model.kernel.lengthscale
                  << " noise_var=" << best.model.noise_var << '\n';
        throw;
    }

    OutFile out(o.out);
    auto& os = out.stream();
    os.precision(17);
    os << "mean = " << fit.mean_value << '\n'
       << "variance = " << fit.model.kernel.variance << '\n'
       << "lengthscale = " << fit.model.kernel.lengthscale << '\n'
       << "noise_var = " << fit.model.noise_var << '\n'
       << "log_likelihood = " << fit.log_likelihood << '\n'
       << "iterations = " << fit.iterations << '\n';
}

// --------------------------------------------------------------- metrics ----

struct MetricsOpts {
    std::string grid_path;
    double prior_var = 1.0;
    std::string method = "recomputed";
    int replicate = 0;
    std::string true_flags, est_flags;
    std::string out;
};

void run_metrics(const MetricsOpts& o) {
    auto in = open_in(o.grid_path);
    const GridTable table = read_grid_csv(in);
    if (!table.truth)
        throw std::invalid_argument("metrics: grid file has no truth column");

    std::optional<std::vector<bool>> tf, ef;
    if (o.true_flags.empty() != o.est_flags.empty())
        throw std::invalid_argument("metrics: --true-flags and --est-flags go together");
    if (!o.true_flags.empty()) {
        auto t = open_in(o.true_flags);
        auto e = open_in(o.est_flags);
        tf = read_flags_csv(t);
        ef = read_flags_csv(e);
    }
    MetricsRow row = compute_metrics(o.method, o.replicate, *table.truth, table.estimate,
                                     o.prior_var, tf ? &*tf : nullptr, ef ? &*ef : nullptr);
    row.config_echo = csv_safe(o.grid_path);
    OutFile out(o.out);
    write_metrics_csv(out.stream(), {row});
}

// ------------------------------------------------------------------ main ----

void add_data_opts(CLI::App* cmd, DataOpts& d) {
    cmd->add_option("--obs", d.obs_path, "observations CSV")->required();
    cmd->add_option("--format", d.format, "input schema: plain or epa")
        ->check(CLI::IsMember({"plain", "epa"}));
    cmd->add_flag("--lonlat", d.lonlat,
                  "treat coordinates as (longitude, latitude); implied by --format epa");
    cmd->add_flag("--no-fahrenheit", d.no_fahrenheit, "epa: skip Fahrenheit-to-Celsius conversion");
    cmd->add_option("--min-value", d.min_value, "epa: drop readings below this (after conversion)");
    cmd->add_option("--max-value", d.max_value, "epa: drop readings above this (after conversion)");
    cmd->add_option("--date-prefix", d.date_prefix, "epa: keep only dates with this prefix");
}

void add_hyper_opts(CLI::App* cmd, HyperOpts& h) {
    cmd->add_option("--hyper", h.hyper_path, "hyperparameter file from fit-hyper");
    cmd->add_option("--mean", h.mean, "field mean");
    cmd->add_option("--variance", h.variance, "kernel variance");
    cmd->add_option("--lengthscale", h.lengthscale, "kernel length scale");
    cmd->add_option("--noise-var", h.noise_var, "per-reading noise variance");
    cmd->add_option("--snr-db", h.snr_db, "derive noise variance from this SNR");
    cmd->add_option("--snr-m", h.snr_m, "reading count for the SNR convention");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatial field reconstruction under sensor gain-offset distortion"};
    app.require_subcommand(1);

    SynthOpts synth;
    auto* synth_cmd = app.add_subcommand("synth", "run a synthetic experiment grid");
    synth_cmd->add_option("--config", synth.config_path, "experiment config file");
    synth_cmd->add_option("--out", synth.out, "metrics CSV (default stdout)");
    synth_cmd->add_option("--seed", synth.seed, "override the config seed");
    synth_cmd->add_option("--replicates", synth.replicates, "override the replicate count");
    synth_cmd->add_option("--dump-prefix", synth.dump_prefix,
                          "write replicate-0 world CSVs under this path prefix");
    synth_cmd->add_flag("--quiet", synth.quiet, "suppress progress output");
    synth_cmd->callback([&] { run_synth(synth); });

    ReconOpts recon;
    auto* recon_cmd = app.add_subcommand("reconstruct", "reconstruct a field from one dataset");
    add_data_opts(recon_cmd, recon.data);
    add_hyper_opts(recon_cmd, recon.hyper);
    recon_cmd->add_option("--method", recon.method, "naive, sblue, cem, or icm")
        ->check(CLI::IsMember({"naive", "sblue", "cem", "icm"}));
    recon_cmd->add_option("--clusters", recon.clusters,
                          "partition sensors and fuse per-cluster estimates");
    recon_cmd->add_option("--prior-atom", recon.prior.atom_weight,
                          "prior probability of default calibration");
    recon_cmd->add_option("--prior-component", recon.prior.components,
                          "mixture component weight:mean_log_gain:sd_log_gain:mean_offset:sd_offset");
    recon_cmd->add_option("--grid-nx", recon.grid_nx, "grid points along x1");
    recon_cmd->add_option("--grid-ny", recon.grid_ny, "grid points along x2");
    recon_cmd->add_option("--x1-range", recon.x1_range, "grid extent LO HI (default: data bounds)")
        ->expected(2);
    recon_cmd->add_option("--x2-range", recon.x2_range, "grid extent LO HI (default: data bounds)")
        ->expected(2);
    recon_cmd->add_option("--truth-grid", recon.truth_grid,
                          "grid CSV supplying a truth column for the output");
    recon_cmd->add_option("--out", recon.out, "grid CSV (default stdout)");
    recon_cmd->add_option("--psi-out", recon.psi_out, "write estimated calibrations CSV");
    recon_cmd->add_option("--flags-out", recon.flags_out, "write estimated distortion flags CSV");
    recon_cmd->add_option("--partition-out", recon.partition_out, "write cluster partition CSV");
    recon_cmd->add_option("--cem-samples", recon.cem_samples, "CEM candidates per iteration");
    recon_cmd->add_option("--cem-elite", recon.cem_elite, "CEM elite fraction");
    recon_cmd->add_option("--cem-max-iterations", recon.cem_max_iterations, "CEM iteration cap");
    recon_cmd->add_option("--icm-restarts", recon.icm_restarts, "ICM restart count");
    recon_cmd->add_option("--seed", recon.seed, "seed for stochastic solvers");
    recon_cmd->callback([&] { run_reconstruct(recon); });

    ClusterOpts cluster;
    auto* cluster_cmd = app.add_subcommand("cluster", "emit a sensor partition");
    cluster_cmd->add_option("--locations", cluster.locations_path, "locations CSV")->required();
    cluster_cmd->add_option("--clusters", cluster.clusters, "number of clusters")->required();
    cluster_cmd->add_flag("--lonlat", cluster.lonlat, "great-circle distances on (lon, lat)");
    cluster_cmd->add_option("--out", cluster.out, "partition CSV (default stdout)");
    cluster_cmd->callback([&] { run_cluster(cluster); });

    FitHyperOpts fit;
    auto* fit_cmd = app.add_subcommand("fit-hyper", "fit field hyperparameters to a dataset");
    add_data_opts(fit_cmd, fit.data);
    fit_cmd->add_option("--init-mean", fit.init_mean, "initial field mean");
    fit_cmd->add_option("--init-variance", fit.init_variance, "initial kernel variance");
    fit_cmd->add_option("--init-lengthscale", fit.init_lengthscale, "initial length scale");
    fit_cmd->add_option("--init-noise-var", fit.init_noise_var, "initial noise variance");
    fit_cmd->add_option("--out", fit.out, "hyperparameter file (default stdout)");
    fit_cmd->callback([&] { run_fit_hyper(fit); });

    MetricsOpts metrics;
    auto* metrics_cmd = app.add_subcommand("metrics", "recompute metrics from saved artifacts");
    metrics_cmd->add_option("--grid", metrics.grid_path, "grid CSV with truth and estimate")
        ->required();
    metrics_cmd->add_option("--prior-var", metrics.prior_var, "prior field variance")->required();
    metrics_cmd->add_option("--method", metrics.method, "method label for the output row");
    metrics_cmd->add_option("--replicate", metrics.replicate, "replicate label for the output row");
    metrics_cmd->add_option("--true-flags", metrics.true_flags, "true distortion flags CSV");
    metrics_cmd->add_option("--est-flags", metrics.est_flags, "estimated distortion flags CSV");
    metrics_cmd->add_option("--out", metrics.out, "metrics CSV (default stdout)");
    metrics_cmd->callback([&] { run_metrics(metrics); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
