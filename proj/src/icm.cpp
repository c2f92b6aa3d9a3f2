#include "fieldrec/icm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fieldrec {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct ConditionalObjective {
    const CalibrationPosterior& post;
    std::size_t n;
    double nu, zeta;

    double value(double log_gain, double offset) const {
        const double lp = log_prior_continuous(n, log_gain, offset, post.prior());
        if (lp == kNegInf) return kNegInf;
        const SensorParams p = SensorParams::continuous(std::exp(log_gain), offset);
        return lp + icm_conditional_loglik(p, nu, zeta, post.summaries()[n],
                                           post.gp().noise_var);
    }
    Eigen::Vector2d gradient(double log_gain, double offset) const {
        const SensorParams p = SensorParams::continuous(std::exp(log_gain), offset);
        return log_prior_continuous_grad(n, log_gain, offset, post.prior()) +
               icm_conditional_loglik_grad(p, nu, zeta, post.summaries()[n],
                                           post.gp().noise_var);
    }
};

// Polak-Ribiere conjugate-gradient ascent.  The line search backtracks to an
// Armijo point, then expands/bisects on the directional derivative so each
// step lands near the 1-d maximum; a fixed-trial backtrack alone crawls when
// the gain curvature dwarfs the offset curvature.
Eigen::Vector2d maximize_conditional(const ConditionalObjective& f, Eigen::Vector2d x,
                                     int max_iterations) {
    x[0] = std::max(x[0], kMinLogGain);
    double fx = f.value(x[0], x[1]);
    if (fx == kNegInf) return x;
    Eigen::Vector2d g = f.gradient(x[0], x[1]);
    Eigen::Vector2d d = g;
    int stalls = 0;
    for (int iter = 0; iter < max_iterations; ++iter) {
        if (g.norm() < 1e-9 * (1.0 + std::abs(fx))) break;
        double dg = d.dot(g);
        if (dg <= 0.0) {  // keep an ascent direction
            d = g;
            dg = g.squaredNorm();
            if (!(dg > 0.0)) break;
        }
        const auto point_at = [&](double t) {
            Eigen::Vector2d xt = x + t * d;
            xt[0] = std::max(xt[0], kMinLogGain);
            return xt;
        };

        double step = 1.0;
        Eigen::Vector2d x_new;
        double f_new = kNegInf;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            x_new = point_at(step);
            f_new = f.value(x_new[0], x_new[1]);
            if (std::isfinite(f_new) && f_new >= fx + 1e-4 * step * dg) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;

        double best_t = step, best_f = f_new;
        Eigen::Vector2d best_x = x_new;
        const double slope = d.dot(f.gradient(x_new[0], x_new[1]));
        double lo = 0.0, hi = -1.0;  // hi < 0 until the 1-d maximum is bracketed
        if (slope > 0.0) {
            for (int ex = 0; ex < 40; ++ex) {
                const double t = best_t * 2.0;
                const Eigen::Vector2d xt = point_at(t);
                const double ft = f.value(xt[0], xt[1]);
                if (!std::isfinite(ft) || ft < best_f) {
                    lo = best_t;
                    hi = t;
                    break;
                }
                const double st = d.dot(f.gradient(xt[0], xt[1]));
                lo = best_t;
                best_t = t;
                best_f = ft;
                best_x = xt;
                if (st <= 0.0) {
                    hi = t;
                    break;
                }
            }
        } else if (slope < 0.0) {
            hi = step;
        }
        if (hi > 0.0) {
            for (int bs = 0; bs < 25 && hi - lo > 1e-10 * (1.0 + hi); ++bs) {
                const double mid = 0.5 * (lo + hi);
                const Eigen::Vector2d xm = point_at(mid);
                const double fm = f.value(xm[0], xm[1]);
                if (std::isfinite(fm) && fm > best_f) {
                    best_t = mid;
                    best_f = fm;
                    best_x = xm;
                }
                if (std::isfinite(fm) && d.dot(f.gradient(xm[0], xm[1])) > 0.0)
                    lo = mid;
                else
                    hi = mid;
            }
        }

        if (best_f <= fx + 1e-12 * (1.0 + std::abs(fx))) {
            if (++stalls >= 2) break;
        } else {
            stalls = 0;
        }
        const Eigen::Vector2d g_new = f.gradient(best_x[0], best_x[1]);
        const double denom = g.squaredNorm();
        const double beta =
            denom > 0.0 ? std::max(0.0, g_new.dot(g_new - g) / denom) : 0.0;
        d = g_new + beta * d;
        x = best_x;
        fx = best_f;
        g = g_new;
    }
    return x;
}

}  // namespace

std::pair<double, double> icm_conditional_stats(std::size_t n, const CalibrationPosterior& post,
                                                const DistortionParams& psi) {
    const Eigen::Index en = static_cast<Eigen::Index>(n);
    if (n >= post.sensor_count()) throw std::invalid_argument("icm_conditional_stats: bad index");
    const Matrix& p = post.latent_precision();
    const double pnn = p(en, en);
    if (!(pnn > 0.0)) throw NumericalError("icm_conditional_stats: non-positive precision");
    const double m = static_cast<double>(post.summaries()[n].count);
    const double zeta = 1.0 / pnn - post.gp().noise_var / m;
    Vector r = post.calibrated_means(psi) - post.prior_mean();
    r[en] = 0.0;  // sensor n's own calibration must not leak into nu
    const double cross = p.row(en).dot(r);
    const double nu = post.prior_mean()[en] - cross / pnn;
    return {nu, zeta};
}

std::pair<double, double> icm_conditional_stats(std::size_t n,
                                                const std::vector<SensorSummary>& summaries,
                                                const GpModel& gp, const DistortionParams& psi) {
    const MixturePrior trivial = MixturePrior::homogeneous(summaries.size(), 1.0, {}, {});
    const CalibrationPosterior post(summaries, gp, trivial);
    return icm_conditional_stats(n, post, psi);
}

double icm_conditional_loglik(const SensorParams& psi_n, double nu, double zeta,
                              const SensorSummary& summary, double noise_var) {
    psi_n.validate();
    summary.validate();
    if (!(noise_var > 0.0)) throw std::invalid_argument("icm_conditional_loglik: need noise > 0");
    if (psi_n.gain < kMinGain) return kNegInf;
    const double a = psi_n.gain;
    const double m = static_cast<double>(summary.count);
    const double resid = std::max(0.0, summary.sum_sq - summary.sum * summary.sum / m);
    const double gt = (summary.mean() - psi_n.offset) / a;
    const double denom = zeta + noise_var / m;
    return -0.5 * (m * std::log(2.0 * M_PI) + (m - 1.0) * std::log(noise_var * a * a) +
                   std::log(a * a * (m * zeta + noise_var)) + resid / (noise_var * a * a) +
                   (gt - nu) * (gt - nu) / denom);
}

Eigen::Vector2d icm_conditional_loglik_grad(const SensorParams& psi_n, double nu, double zeta,
                                            const SensorSummary& summary, double noise_var) {
    psi_n.validate();
    const double a = psi_n.gain;
    const double m = static_cast<double>(summary.count);
    const double resid = std::max(0.0, summary.sum_sq - summary.sum * summary.sum / m);
    const double gt = (summary.mean() - psi_n.offset) / a;
    const double denom = zeta + noise_var / m;
    Eigen::Vector2d grad;
    grad[0] = -m + resid / (noise_var * a * a) + gt * (gt - nu) / denom;
    grad[1] = (gt - nu) / (a * denom);
    return grad;
}

MapEstimate icm_optimize(const std::vector<SensorSummary>& summaries, const GpModel& gp,
                         const MixturePrior& prior, int restarts, Rng& rng,
                         const IcmOptions& options) {
    if (restarts < 1) throw std::invalid_argument("icm_optimize: restarts must be >= 1");
    const CalibrationPosterior post(summaries, gp, prior);
    const std::size_t n_sensors = summaries.size();

    MapEstimate best;
    best.objective = kNegInf;
    best.restarts = restarts;

    for (int restart = 0; restart < restarts; ++restart) {
        DistortionParams psi = sample_prior(prior, rng);
        std::vector<double> trace;
        int performed = 0;
        for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
            performed = sweep + 1;
            bool changed = false;
            for (std::size_t n = 0; n < n_sensors; ++n) {
                const auto [nu, zeta] = icm_conditional_stats(n, post, psi);
                const double noise = gp.noise_var;
                const double val_cur =
                    log_prior_sensor(n, psi[n], prior) +
                    icm_conditional_loglik(psi[n], nu, zeta, summaries[n], noise);

                const double val_atom =
                    std::log(prior.atom_weight(n)) +
                    icm_conditional_loglik(SensorParams::atom(), nu, zeta, summaries[n], noise);

                double val_cont = kNegInf;
                SensorParams cont = psi[n];
                if (prior.component_count() > 0) {
                    // start at the best-scoring component mean for this sensor's data
                    Eigen::Vector2d start = prior.components[0].mean;
                    double start_score = kNegInf;
                    for (std::size_t k = 0; k < prior.component_count(); ++k) {
                        const double q = prior.component_weight(n, k + 1);
                        if (q <= 0.0) continue;
                        const Eigen::Vector2d mean = prior.components[k].mean;
                        const SensorParams p =
                            SensorParams::continuous(std::exp(mean[0]), mean[1]);
                        const double score =
                            std::log(q) +
                            icm_conditional_loglik(p, nu, zeta, summaries[n], noise);
                        if (score > start_score) {
                            start_score = score;
                            start = mean;
                        }
                    }
                    const ConditionalObjective f{post, n, nu, zeta};
                    const Eigen::Vector2d opt =
                        maximize_conditional(f, start, options.max_cg_iterations);
                    val_cont = f.value(opt[0], opt[1]);
                    if (val_cont > kNegInf)
                        cont = SensorParams::continuous(std::exp(opt[0]), opt[1]);
                }

                // greedy pick among {current, atom, continuous optimum}
                if (val_atom > val_cur + options.tolerance && val_atom >= val_cont) {
                    psi[n] = SensorParams::atom();
                    changed = true;
                } else if (val_cont > val_cur + options.tolerance) {
                    psi[n] = cont;
                    changed = true;
                }
            }
            trace.push_back(post.log_posterior(psi));
            if (!changed) break;
        }
        const double objective = post.log_posterior(psi);
        if (objective > best.objective) {
            best.objective = objective;
            best.psi = std::move(psi);
            best.iterations = performed;
            best.trace = std::move(trace);
        }
    }
    return best;
}

}  // namespace fieldrec
