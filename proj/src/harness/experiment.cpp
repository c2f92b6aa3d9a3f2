#include "fieldrec/harness/experiment.hpp"

#include <algorithm>
#include <optional>
#include <sstream>

#include "fieldrec/cem.hpp"
#include "fieldrec/distributed.hpp"
#include "fieldrec/icm.hpp"
#include "fieldrec/posterior.hpp"
#include "fieldrec/sblue.hpp"

namespace fieldrec {
namespace {

bool wants(const std::vector<std::string>& methods, const std::string& name) {
    return std::find(methods.begin(), methods.end(), name) != methods.end();
}

std::vector<bool> distorting_flags(const DistortionParams& psi) {
    std::vector<bool> flags(psi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) flags[i] = !psi[i].is_default;
    return flags;
}

// Per-grid-point linear predictor: estimate = weights^T obs_means + intercept.
struct SblueGrid {
    Matrix weights;    // N x G
    Vector intercept;  // G
    Vector risk;       // G
};

SblueGrid precompute_sblue(const SblueSolver& solver, std::size_t n_sensors,
                           const std::vector<Location>& grid) {
    SblueGrid out;
    const auto g = static_cast<Eigen::Index>(grid.size());
    out.weights.resize(static_cast<Eigen::Index>(n_sensors), g);
    out.intercept.resize(g);
    out.risk.resize(g);
    for (Eigen::Index i = 0; i < g; ++i) {
        const SblueModel model = solver.fit(grid[i]);
        out.weights.col(i) = model.weights;
        out.intercept[i] = model.intercept;
        out.risk[i] = model.risk;
    }
    return out;
}

Vector observation_means(const std::vector<SensorSummary>& summaries) {
    Vector means(static_cast<Eigen::Index>(summaries.size()));
    for (std::size_t i = 0; i < summaries.size(); ++i) means[i] = summaries[i].mean();
    return means;
}

Vector predict_grid(const CalibrationPosterior& post, const DistortionParams& psi,
                    const std::vector<Location>& grid) {
    Vector est(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) est[i] = post.predict(grid[i], psi).mean;
    return est;
}

struct ClusterContext {
    std::vector<std::size_t> idx;  // global sensor indices, ascending
    std::vector<Location> locations;
    std::vector<int> counts;
    MixturePrior prior;
};

struct MethodOutput {
    Vector estimate;
    std::optional<std::vector<bool>> flags;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    const GpModel gp = cfg.gp_model();
    const Rng master(cfg.seed);
    const int n = cfg.sensors;

    ExperimentResult result;
    SyntheticWorld& world = result.world;
    {
        Rng placement = master.fork(streams::placement);
        Rng field = master.fork(streams::field);
        world.sensors = place_sensors(n, cfg.domain_lo, cfg.domain_hi, placement);
        world.grid = make_grid(cfg.domain_lo, cfg.domain_hi, cfg.grid_nx, cfg.grid_ny);
        std::vector<Location> all = world.sensors;
        all.insert(all.end(), world.grid.begin(), world.grid.end());
        const Vector joint = sample_field(gp, all, field);
        world.field_sensors = joint.head(n);
        world.field_grid = joint.tail(static_cast<Eigen::Index>(world.grid.size()));
    }

    const MixturePrior prior = cfg.prior.build(n);
    const std::vector<int> counts(static_cast<std::size_t>(n), cfg.obs_per_sensor);
    DistortionParams base_truth;
    if (!cfg.truth.redraw_each_replicate) {
        Rng truth_rng = master.fork(streams::truth);
        base_truth = sample_truth(cfg.truth, cfg.prior, n, truth_rng);
    }

    const bool want_cluster =
        wants(cfg.methods, "ds-blue") || wants(cfg.methods, "deb-cem") || wants(cfg.methods, "deb-icm");
    const bool want_posterior = wants(cfg.methods, "oracle") || wants(cfg.methods, "naive") ||
                                wants(cfg.methods, "cem") || wants(cfg.methods, "icm");

    std::optional<SblueGrid> sblue_grid;
    if (wants(cfg.methods, "sblue"))
        sblue_grid = precompute_sblue(SblueSolver(world.sensors, gp, prior, counts), n, world.grid);

    std::vector<ClusterContext> clusters;
    std::vector<SblueGrid> cluster_sblue;
    if (want_cluster) {
        Matrix dist(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                dist(i, j) = (world.sensors[i] - world.sensors[j]).norm();
        const ClusterPartition partition = complete_linkage(dist, cfg.clusters).partition;
        for (const auto& members : partition.members()) {
            ClusterContext ctx;
            ctx.idx = members;
            for (std::size_t i : members) ctx.locations.push_back(world.sensors[i]);
            ctx.counts.assign(members.size(), cfg.obs_per_sensor);
            ctx.prior = cfg.prior.build(members.size());
            clusters.push_back(std::move(ctx));
        }
        if (wants(cfg.methods, "ds-blue"))
            for (const auto& ctx : clusters)
                cluster_sblue.push_back(precompute_sblue(
                    SblueSolver(ctx.locations, gp, ctx.prior, ctx.counts), ctx.idx.size(),
                    world.grid));
    }

    const std::string echo = cfg.echo();
    const auto grid_size = static_cast<Eigen::Index>(world.grid.size());

    CemConfig cem_base;
    cem_base.sample_count = cfg.cem_samples;
    cem_base.elite_fraction = cfg.cem_elite;
    cem_base.max_iterations = cfg.cem_max_iterations;

    for (int r = 0; r < cfg.replicates; ++r) {
        DistortionParams truth_psi;
        if (cfg.truth.redraw_each_replicate) {
            Rng redraw = master.fork(streams::redraw + static_cast<std::uint64_t>(r));
            truth_psi = sample_truth(cfg.truth, cfg.prior, n, redraw);
        } else {
            truth_psi = base_truth;
        }
        Rng noise = master.fork(streams::noise + static_cast<std::uint64_t>(r));
        ObservationSet obs = sample_observations(world.sensors, world.field_sensors, truth_psi,
                                                 cfg.obs_per_sensor, gp.noise_var, noise);
        if (r == 0) {
            world.truth = truth_psi;
            world.observations = obs;
        }
        const std::vector<bool> true_flags = distorting_flags(truth_psi);
        const Vector means = observation_means(obs.summaries);

        std::optional<CalibrationPosterior> post;
        if (want_posterior) post.emplace(obs.summaries, gp, prior);

        std::vector<std::optional<CalibrationPosterior>> cluster_post(clusters.size());
        auto cluster_summaries = [&](const ClusterContext& ctx) {
            std::vector<SensorSummary> out;
            for (std::size_t i : ctx.idx) out.push_back(obs.summaries[i]);
            return out;
        };
        auto local_posterior = [&](std::size_t c) -> const CalibrationPosterior& {
            if (!cluster_post[c])
                cluster_post[c].emplace(cluster_summaries(clusters[c]), gp, clusters[c].prior);
            return *cluster_post[c];
        };

        // distributed empirical-Bayes pass: fit psi per cluster, fuse by
        // minimal predictive variance
        auto run_deb = [&](bool use_cem, std::uint64_t stream) -> MethodOutput {
            DistortionParams full_psi = all_default(n);
            std::vector<Vector> local_est(clusters.size());
            std::vector<Vector> local_var(clusters.size());
            for (std::size_t c = 0; c < clusters.size(); ++c) {
                const auto& ctx = clusters[c];
                const CalibrationPosterior& lp = local_posterior(c);
                DistortionParams psi_c;
                if (use_cem) {
                    CemConfig cc = cem_base;
                    cc.seed = master.fork(stream + static_cast<std::uint64_t>(r))
                                  .fork(c)
                                  .seed();
                    psi_c = cem_optimize([&lp](const DistortionParams& p) { return lp.log_posterior(p); },
                                         ctx.prior, cc)
                                .psi;
                } else {
                    Rng icm_rng = master.fork(stream + static_cast<std::uint64_t>(r)).fork(c);
                    psi_c = icm_optimize(lp.summaries(), gp, ctx.prior, cfg.icm_restarts, icm_rng)
                                .psi;
                }
                for (std::size_t j = 0; j < ctx.idx.size(); ++j) full_psi[ctx.idx[j]] = psi_c[j];
                local_est[c].resize(grid_size);
                local_var[c].resize(grid_size);
                for (Eigen::Index i = 0; i < grid_size; ++i) {
                    const PredictiveGaussian pred = lp.predict(world.grid[i], psi_c);
                    local_est[c][i] = pred.mean;
                    local_var[c][i] = pred.variance;
                }
            }
            MethodOutput out;
            out.estimate.resize(grid_size);
            for (Eigen::Index i = 0; i < grid_size; ++i) {
                std::vector<LocalEstimate> locals;
                for (std::size_t c = 0; c < clusters.size(); ++c)
                    locals.push_back({static_cast<int>(c) + 1, local_est[c][i], local_var[c][i]});
                out.estimate[i] = deb_fuse(locals);
            }
            out.flags = distorting_flags(full_psi);
            return out;
        };

        auto run_method = [&](const std::string& method) -> MethodOutput {
            if (method == "oracle") return {predict_grid(*post, truth_psi, world.grid), {}};
            if (method == "naive") return {predict_grid(*post, all_default(n), world.grid), {}};
            if (method == "sblue")
                return {sblue_grid->weights.transpose() * means + sblue_grid->intercept, {}};
            if (method == "cem") {
                CemConfig cc = cem_base;
                cc.seed = master.fork(streams::cem + static_cast<std::uint64_t>(r)).seed();
                const MapEstimate map = cem_optimize(
                    [&](const DistortionParams& p) { return post->log_posterior(p); }, prior, cc);
                return {predict_grid(*post, map.psi, world.grid), distorting_flags(map.psi)};
            }
            if (method == "icm") {
                Rng icm_rng = master.fork(streams::icm + static_cast<std::uint64_t>(r));
                const MapEstimate map =
                    icm_optimize(obs.summaries, gp, prior, cfg.icm_restarts, icm_rng);
                return {predict_grid(*post, map.psi, world.grid), distorting_flags(map.psi)};
            }
            if (method == "ds-blue") {
                MethodOutput out;
                out.estimate.resize(grid_size);
                std::vector<Vector> local_means(clusters.size());
                for (std::size_t c = 0; c < clusters.size(); ++c)
                    local_means[c] = observation_means(cluster_summaries(clusters[c]));
                for (Eigen::Index i = 0; i < grid_size; ++i) {
                    std::vector<LocalEstimate> locals;
                    for (std::size_t c = 0; c < clusters.size(); ++c) {
                        const double est = cluster_sblue[c].weights.col(i).dot(local_means[c]) +
                                           cluster_sblue[c].intercept[i];
                        locals.push_back({static_cast<int>(c) + 1, est, cluster_sblue[c].risk[i]});
                    }
                    out.estimate[i] = dsblue_fuse(locals).first;
                }
                return out;
            }
            if (method == "deb-cem") return run_deb(true, streams::deb_cem);
            if (method == "deb-icm") return run_deb(false, streams::deb_icm);
            throw std::invalid_argument("unknown method '" + method + "'");
        };

        for (const auto& method : cfg.methods) {
            MetricsRow row;
            try {
                const MethodOutput out = run_method(method);
                row = compute_metrics(method, r, world.field_grid, out.estimate, cfg.variance,
                                      out.flags ? &true_flags : nullptr,
                                      out.flags ? &*out.flags : nullptr);
            } catch (const std::exception& e) {
                row.method = method;
                row.replicate = r;
                row.status = std::string("error:") + e.what();
            }
            row.config_echo = echo;
            result.rows.push_back(std::move(row));
        }
        if (progress) {
            std::ostringstream os;
            os << "replicate " << (r + 1) << "/" << cfg.replicates;
            progress(os.str());
        }
    }
    return result;
}

}  // namespace fieldrec
