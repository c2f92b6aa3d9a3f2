#include "fieldrec/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fieldrec {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kCovFloor = 1e-8;
constexpr double kRespFloor = 1e-8;

Eigen::Matrix2d floor_covariance(Eigen::Matrix2d s) {
    s = 0.5 * (s + s.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s);
    Eigen::Vector2d ev = es.eigenvalues().cwiseMax(kCovFloor);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// log of the continuous mixture density on (log gain, offset) for sensor n
double continuous_log_density(const SamplerParams& p, std::size_t n, double log_gain,
                              double offset) {
    const std::size_t kk = p.component_count();
    double max_term = kNegInf;
    std::vector<double> terms(kk, kNegInf);
    for (std::size_t k = 0; k < kk; ++k) {
        const double w = p.weights(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k + 1));
        if (w <= 0.0) continue;
        terms[k] = std::log(w) + p.components[n][k].log_density(log_gain, offset);
        max_term = std::max(max_term, terms[k]);
    }
    if (max_term == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - max_term);
    return max_term + std::log(acc);
}

}  // namespace

void SamplerParams::validate() const {
    const Eigen::Index n = weights.rows();
    const Eigen::Index cols = weights.cols();
    if (n < 1 || cols < 1) throw std::invalid_argument("sampler params: empty weight table");
    if (components.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("sampler params: component rows != sensors");
    for (const auto& row : components) {
        if (row.size() + 1 != static_cast<std::size_t>(cols))
            throw std::invalid_argument("sampler params: component count mismatch");
        for (const auto& c : row) c.validate();
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (!(weights(i, j) >= 0.0))
                throw std::invalid_argument("sampler params: negative weight");
            total += weights(i, j);
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("sampler params: weights must sum to one");
    }
}

SamplerParams SamplerParams::from_prior(const MixturePrior& prior) {
    prior.validate();
    SamplerParams p;
    p.weights = prior.weights;
    p.components.assign(prior.sensor_count(), prior.components);
    return p;
}

DistortionParams sample_from(const SamplerParams& params, Rng& rng) {
    DistortionParams psi;
    psi.reserve(params.sensor_count());
    std::vector<double> w(static_cast<std::size_t>(params.weights.cols()));
    for (std::size_t n = 0; n < params.sensor_count(); ++n) {
        for (std::size_t j = 0; j < w.size(); ++j)
            w[j] = params.weights(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
        const std::size_t z = rng.categorical(w);
        if (z == 0) {
            psi.push_back(SensorParams::atom());
            continue;
        }
        psi.push_back(sample_component(params.components[n][z - 1], rng));
    }
    return psi;
}

double sampler_log_density(const SamplerParams& params, const DistortionParams& psi) {
    if (psi.size() != params.sensor_count())
        throw std::invalid_argument("sampler_log_density: sensor count mismatch");
    double total = 0.0;
    for (std::size_t n = 0; n < psi.size(); ++n) {
        if (psi[n].is_default) {
            total += std::log(params.weights(static_cast<Eigen::Index>(n), 0));
        } else {
            total += continuous_log_density(params, n, std::log(psi[n].gain), psi[n].offset);
        }
        if (total == kNegInf) return kNegInf;
    }
    return total;
}

double sampler_log_likelihood(const SamplerParams& params,
                              const std::vector<DistortionParams>& samples) {
    double total = 0.0;
    for (const auto& s : samples) total += sampler_log_density(params, s);
    return total;
}

EmResult em_fit_mixture(const std::vector<DistortionParams>& samples, const SamplerParams& init,
                        const EmOptions& options) {
    if (samples.empty()) throw std::invalid_argument("em_fit_mixture: no samples");
    init.validate();
    const std::size_t n_sensors = init.sensor_count();
    const std::size_t kk = init.component_count();
    for (const auto& s : samples)
        if (s.size() != n_sensors)
            throw std::invalid_argument("em_fit_mixture: sample sensor count mismatch");

    if (kk == 0)
        for (const auto& s : samples)
            for (const auto& sp : s)
                if (!sp.is_default)
                    throw std::invalid_argument(
                        "em_fit_mixture: off-atom sample but no continuous components");

    const std::size_t s_count = samples.size();
    EmResult result;
    result.params = init;
    SamplerParams& p = result.params;

    double prev_ll = sampler_log_likelihood(p, samples);
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        for (std::size_t n = 0; n < n_sensors; ++n) {
            // E-step: atom responsibility is the flag; continuous components
            // split the rest proportionally to their weighted densities.
            std::vector<double> resp(s_count * kk, 0.0);
            std::size_t default_count = 0;
            for (std::size_t i = 0; i < s_count; ++i) {
                const SensorParams& sp = samples[i][n];
                if (sp.is_default) {
                    ++default_count;
                    continue;
                }
                const double la = std::log(sp.gain);
                double max_term = kNegInf;
                std::vector<double> terms(kk, kNegInf);
                for (std::size_t k = 0; k < kk; ++k) {
                    const double w = p.weights(static_cast<Eigen::Index>(n),
                                               static_cast<Eigen::Index>(k + 1));
                    if (w <= 0.0) continue;
                    terms[k] = std::log(w) + p.components[n][k].log_density(la, sp.offset);
                    max_term = std::max(max_term, terms[k]);
                }
                if (max_term == kNegInf) {
                    // no continuous support left; spread evenly to stay defined
                    for (std::size_t k = 0; k < kk; ++k)
                        resp[i * kk + k] = 1.0 / static_cast<double>(kk);
                    continue;
                }
                double denom = 0.0;
                for (double t : terms) denom += std::exp(t - max_term);
                for (std::size_t k = 0; k < kk; ++k)
                    if (terms[k] != kNegInf)
                        resp[i * kk + k] = std::exp(terms[k] - max_term) / denom;
            }

            // M-step: exact weighted MLE
            p.weights(static_cast<Eigen::Index>(n), 0) =
                static_cast<double>(default_count) / static_cast<double>(s_count);
            for (std::size_t k = 0; k < kk; ++k) {
                double total_resp = 0.0;
                for (std::size_t i = 0; i < s_count; ++i) total_resp += resp[i * kk + k];
                p.weights(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k + 1)) =
                    total_resp / static_cast<double>(s_count);
                if (total_resp < kRespFloor) continue;  // keep previous parameters
                Eigen::Vector2d mean = Eigen::Vector2d::Zero();
                for (std::size_t i = 0; i < s_count; ++i) {
                    const double r = resp[i * kk + k];
                    if (r == 0.0) continue;
                    const SensorParams& sp = samples[i][n];
                    mean += r * Eigen::Vector2d(std::log(sp.gain), sp.offset);
                }
                mean /= total_resp;
                Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
                for (std::size_t i = 0; i < s_count; ++i) {
                    const double r = resp[i * kk + k];
                    if (r == 0.0) continue;
                    const SensorParams& sp = samples[i][n];
                    const Eigen::Vector2d d =
                        Eigen::Vector2d(std::log(sp.gain), sp.offset) - mean;
                    cov += r * (d * d.transpose());
                }
                cov /= total_resp;
                p.components[n][k].mean = mean;
                p.components[n][k].cov = floor_covariance(cov);
            }
        }

        const double ll = sampler_log_likelihood(p, samples);
        result.log_likelihood_trace.push_back(ll);
        if (std::isfinite(ll) && std::isfinite(prev_ll) && ll - prev_ll < options.tolerance)
            break;
        prev_ll = ll;
    }
    return result;
}

}  // namespace fieldrec
