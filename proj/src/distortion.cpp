#include "fieldrec/distortion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fieldrec {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// 2x2 symmetric inverse and log-determinant; throws if not SPD.
struct Inv2 {
    double i00, i01, i11, log_det;
};
Inv2 invert_spd2(const Eigen::Matrix2d& s) {
    const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
    if (!(s(0, 0) > 0.0) || !(det > 0.0) || !s.allFinite())
        throw std::invalid_argument("2x2 covariance must be symmetric positive definite");
    return {s(1, 1) / det, -s(0, 1) / det, s(0, 0) / det, std::log(det)};
}

}  // namespace

SensorParams SensorParams::continuous(double gain, double offset) {
    SensorParams p;
    p.is_default = false;
    p.gain = gain;
    p.offset = offset;
    p.validate();
    return p;
}

void SensorParams::validate() const {
    if (is_default) {
        if (gain != 1.0 || offset != 0.0)
            throw std::invalid_argument("default sensor params must be exactly (1, 0)");
        return;
    }
    if (!(gain > 0.0) || !std::isfinite(gain))
        throw std::invalid_argument("sensor gain must be positive and finite");
    if (!std::isfinite(offset)) throw std::invalid_argument("sensor offset must be finite");
}

DistortionParams all_default(std::size_t n_sensors) {
    return DistortionParams(n_sensors, SensorParams::atom());
}

void MixtureComponent::validate() const {
    if (!mean.allFinite()) throw std::invalid_argument("component mean must be finite");
    if (std::abs(cov(0, 1) - cov(1, 0)) > 1e-12 * (1.0 + std::abs(cov(0, 1))))
        throw std::invalid_argument("component covariance must be symmetric");
    invert_spd2(cov);
}

double MixtureComponent::log_density(double log_gain, double offset) const {
    const Inv2 inv = invert_spd2(cov);
    const double r0 = log_gain - mean[0];
    const double r1 = offset - mean[1];
    const double quad = inv.i00 * r0 * r0 + 2.0 * inv.i01 * r0 * r1 + inv.i11 * r1 * r1;
    return -std::log(2.0 * M_PI) - 0.5 * inv.log_det - 0.5 * quad;
}

Eigen::Vector2d MixtureComponent::log_density_grad(double log_gain, double offset) const {
    const Inv2 inv = invert_spd2(cov);
    const double r0 = log_gain - mean[0];
    const double r1 = offset - mean[1];
    return {-(inv.i00 * r0 + inv.i01 * r1), -(inv.i01 * r0 + inv.i11 * r1)};
}

double MixtureComponent::mean_gain() const { return std::exp(mean[0] + 0.5 * cov(0, 0)); }
double MixtureComponent::mean_gain_sq() const { return std::exp(2.0 * mean[0] + 2.0 * cov(0, 0)); }
double MixtureComponent::mean_gain_offset() const {
    return mean_gain() * (mean[1] + cov(0, 1));
}

void MixturePrior::validate() const {
    const Eigen::Index n = weights.rows();
    const Eigen::Index kk = weights.cols();
    if (n < 1 || kk < 1) throw std::invalid_argument("mixture prior: empty weight table");
    if (static_cast<std::size_t>(kk) != components.size() + 1)
        throw std::invalid_argument("mixture prior: weight columns must be components + 1");
    for (Eigen::Index i = 0; i < n; ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < kk; ++j) {
            const double w = weights(i, j);
            if (!(w >= 0.0) || !std::isfinite(w))
                throw std::invalid_argument("mixture prior: weights must be non-negative");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw std::invalid_argument("mixture prior: weights must sum to one");
    }
    for (const auto& c : components) c.validate();
}

MixturePrior MixturePrior::homogeneous(std::size_t n_sensors, double atom_weight,
                                       const std::vector<double>& component_weights,
                                       std::vector<MixtureComponent> comps) {
    MixturePrior prior;
    prior.components = std::move(comps);
    prior.weights.resize(static_cast<Eigen::Index>(n_sensors),
                         static_cast<Eigen::Index>(component_weights.size() + 1));
    for (Eigen::Index i = 0; i < prior.weights.rows(); ++i) {
        prior.weights(i, 0) = atom_weight;
        for (std::size_t k = 0; k < component_weights.size(); ++k)
            prior.weights(i, static_cast<Eigen::Index>(k + 1)) = component_weights[k];
    }
    prior.validate();
    return prior;
}

void SensorSummary::validate() const {
    if (count < 1) throw std::invalid_argument("sensor summary: count must be >= 1");
    if (!location.allFinite() || !std::isfinite(sum) || !std::isfinite(sum_sq))
        throw std::invalid_argument("sensor summary: non-finite fields");
    if (sum_sq < sum * sum / static_cast<double>(count) - 1e-9 * (1.0 + sum_sq))
        throw std::invalid_argument("sensor summary: sum of squares below mean-square bound");
}

double apply_distortion(double u, const SensorParams& psi) {
    psi.validate();
    if (psi.is_default) return u;
    return psi.gain * u + psi.offset;
}

SensorSummary summarize(const Location& location, const std::vector<double>& observations) {
    if (observations.empty()) throw std::invalid_argument("summarize: no observations");
    if (!location.allFinite()) throw std::invalid_argument("summarize: non-finite location");
    SensorSummary s;
    s.location = location;
    s.count = static_cast<int>(observations.size());
    for (double v : observations) {
        if (!std::isfinite(v)) throw std::invalid_argument("summarize: non-finite observation");
        s.sum += v;
        s.sum_sq += v * v;
    }
    return s;
}

double log_prior_sensor(std::size_t n, const SensorParams& psi, const MixturePrior& prior) {
    psi.validate();
    if (n >= prior.sensor_count()) throw std::invalid_argument("log_prior_sensor: bad index");
    if (psi.is_default) return std::log(prior.atom_weight(n));
    if (psi.gain < kMinGain) return kNegInf;
    return log_prior_continuous(n, std::log(psi.gain), psi.offset, prior);
}

double log_prior(const DistortionParams& psi, const MixturePrior& prior) {
    prior.validate();
    if (psi.size() != prior.sensor_count())
        throw std::invalid_argument("log_prior: sensor count mismatch");
    double total = 0.0;
    for (std::size_t n = 0; n < psi.size(); ++n) {
        total += log_prior_sensor(n, psi[n], prior);
        if (total == kNegInf) return kNegInf;
    }
    return total;
}

double log_prior_continuous(std::size_t n, double log_gain, double offset,
                            const MixturePrior& prior) {
    if (log_gain < kMinLogGain) return kNegInf;
    const std::size_t kk = prior.component_count();
    double max_term = kNegInf;
    std::vector<double> terms(kk, kNegInf);
    for (std::size_t k = 0; k < kk; ++k) {
        const double q = prior.component_weight(n, k + 1);
        if (q <= 0.0) continue;
        terms[k] = std::log(q) + prior.components[k].log_density(log_gain, offset);
        max_term = std::max(max_term, terms[k]);
    }
    if (max_term == kNegInf) return kNegInf;
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - max_term);
    // change of variables (log gain, offset) -> (gain, offset)
    return max_term + std::log(acc) - log_gain;
}

Eigen::Vector2d log_prior_continuous_grad(std::size_t n, double log_gain, double offset,
                                          const MixturePrior& prior) {
    const std::size_t kk = prior.component_count();
    double max_term = kNegInf;
    std::vector<double> terms(kk, kNegInf);
    for (std::size_t k = 0; k < kk; ++k) {
        const double q = prior.component_weight(n, k + 1);
        if (q <= 0.0) continue;
        terms[k] = std::log(q) + prior.components[k].log_density(log_gain, offset);
        max_term = std::max(max_term, terms[k]);
    }
    if (max_term == kNegInf)
        throw std::invalid_argument("log_prior_continuous_grad: zero continuous support");
    double total = 0.0;
    for (double t : terms) total += std::exp(t - max_term);
    Eigen::Vector2d grad(-1.0, 0.0);  // d(-log gain)/d(log gain)
    for (std::size_t k = 0; k < kk; ++k) {
        if (terms[k] == kNegInf) continue;
        const double resp = std::exp(terms[k] - max_term) / total;
        grad += resp * prior.components[k].log_density_grad(log_gain, offset);
    }
    return grad;
}

SensorParams sample_component(const MixtureComponent& component, Rng& rng) {
    const Eigen::LLT<Eigen::Matrix2d> llt(component.cov);
    if (llt.info() != Eigen::Success)
        throw NumericalError("sample_component: covariance not SPD");
    const Eigen::Matrix2d l = llt.matrixL();
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double log_gain = component.mean[0] + l(0, 0) * z1;
    const double offset = component.mean[1] + l(1, 0) * z1 + l(1, 1) * z2;
    return SensorParams::continuous(std::exp(log_gain), offset);
}

SensorParams sample_prior_sensor(std::size_t n, const MixturePrior& prior, Rng& rng) {
    if (n >= prior.sensor_count()) throw std::invalid_argument("sample_prior_sensor: bad index");
    std::vector<double> w(static_cast<std::size_t>(prior.weights.cols()));
    for (std::size_t j = 0; j < w.size(); ++j)
        w[j] = prior.weights(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(j));
    const std::size_t z = rng.categorical(w);
    if (z == 0) return SensorParams::atom();
    return sample_component(prior.components[z - 1], rng);
}

DistortionParams sample_prior(const MixturePrior& prior, Rng& rng) {
    prior.validate();
    DistortionParams psi;
    psi.reserve(prior.sensor_count());
    for (std::size_t n = 0; n < prior.sensor_count(); ++n)
        psi.push_back(sample_prior_sensor(n, prior, rng));
    return psi;
}

}  // namespace fieldrec
