#include "fieldrec/posterior.hpp"

#include <cmath>
#include <limits>

namespace fieldrec {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<Location> sensor_locations(const std::vector<SensorSummary>& summaries) {
    std::vector<Location> locs;
    locs.reserve(summaries.size());
    for (const auto& s : summaries) locs.push_back(s.location);
    return locs;
}

}  // namespace

CalibrationPosterior::CalibrationPosterior(std::vector<SensorSummary> summaries, GpModel gp,
                                           MixturePrior prior)
    : summaries_(std::move(summaries)), gp_(std::move(gp)), prior_(std::move(prior)) {
    gp_.validate();
    prior_.validate();
    if (summaries_.empty()) throw std::invalid_argument("posterior: no sensors");
    if (prior_.sensor_count() != summaries_.size())
        throw std::invalid_argument("posterior: prior sensor count mismatch");
    if (!(gp_.noise_var > 0.0))
        throw std::invalid_argument("posterior: needs positive observation noise variance");
    for (const auto& s : summaries_) s.validate();

    const auto locs = sensor_locations(summaries_);
    const Eigen::Index n = static_cast<Eigen::Index>(summaries_.size());
    mu_ = mean_vector(locs, gp_.mean);
    upsilon_ = build_covariance(locs, gp_.kernel);
    residual_ss_.resize(n);
    double total_count = 0.0;
    double log_det_noise = 0.0;  // log|noise_var * diag(1/M)|
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = summaries_[static_cast<std::size_t>(i)];
        const double m = static_cast<double>(s.count);
        upsilon_(i, i) += gp_.noise_var / m;
        residual_ss_[i] = std::max(0.0, s.sum_sq - s.sum * s.sum / m);
        total_count += m;
        log_det_noise += std::log(gp_.noise_var / m);
    }
    upsilon_llt_ = jittered_llt(upsilon_, gp_.kernel.variance);
    upsilon_log_det_ = llt_log_det(upsilon_llt_);
    precision_ = upsilon_llt_.solve(Matrix::Identity(n, n));
    psi_free_terms_ =
        total_count * std::log(2.0 * M_PI) - log_det_noise + upsilon_log_det_;
}

Vector CalibrationPosterior::calibrated_means(const DistortionParams& psi) const {
    if (psi.size() != summaries_.size())
        throw std::invalid_argument("calibrated_means: sensor count mismatch");
    Vector gt(static_cast<Eigen::Index>(psi.size()));
    for (std::size_t i = 0; i < psi.size(); ++i) {
        psi[i].validate();
        gt[static_cast<Eigen::Index>(i)] =
            (summaries_[i].mean() - psi[i].offset) / psi[i].gain;
    }
    return gt;
}

double CalibrationPosterior::log_likelihood(const DistortionParams& psi) const {
    const Vector gt = calibrated_means(psi);
    double acc = psi_free_terms_;
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const double m = static_cast<double>(summaries_[i].count);
        const double a2 = psi[i].gain * psi[i].gain;
        acc += m * std::log(gp_.noise_var * a2);
        acc += residual_ss_[static_cast<Eigen::Index>(i)] / (gp_.noise_var * a2);
    }
    const Vector r = gt - mu_;
    acc += r.dot(upsilon_llt_.solve(r));
    return -0.5 * acc;
}

double CalibrationPosterior::log_posterior(const DistortionParams& psi) const {
    const double lp = log_prior(psi, prior_);
    if (lp == kNegInf) return kNegInf;
    return log_likelihood(psi) + lp;
}

Vector CalibrationPosterior::log_posterior_gradient(const DistortionParams& psi) const {
    for (const auto& p : psi)
        if (p.is_default)
            throw std::invalid_argument(
                "log_posterior_gradient: undefined at the default-calibration atom");
    const Vector gt = calibrated_means(psi);
    const Vector alpha = upsilon_llt_.solve(gt - mu_);
    Vector grad(2 * static_cast<Eigen::Index>(psi.size()));
    for (std::size_t i = 0; i < psi.size(); ++i) {
        const auto ei = static_cast<Eigen::Index>(i);
        const double m = static_cast<double>(summaries_[i].count);
        const double a = psi[i].gain;
        const Eigen::Vector2d pg =
            log_prior_continuous_grad(i, std::log(a), psi[i].offset, prior_);
        grad[2 * ei] = -m + residual_ss_[ei] / (gp_.noise_var * a * a) +
                       gt[ei] * alpha[ei] + pg[0];
        grad[2 * ei + 1] = alpha[ei] / a + pg[1];
    }
    return grad;
}

PredictiveGaussian CalibrationPosterior::predict(const Location& target,
                                                 const DistortionParams& psi) const {
    const auto locs = sensor_locations(summaries_);
    const Vector k = cross_covariance(locs, target, gp_.kernel);
    const Vector gt = calibrated_means(psi);
    PredictiveGaussian out;
    out.mean = gp_.mean(target) + k.dot(upsilon_llt_.solve(gt - mu_));
    out.variance =
        std::max(0.0, gp_.kernel.variance - k.dot(upsilon_llt_.solve(k)));
    return out;
}

double log_posterior_unnorm(const DistortionParams& psi,
                            const std::vector<SensorSummary>& summaries, const GpModel& gp,
                            const MixturePrior& prior) {
    return CalibrationPosterior(summaries, gp, prior).log_posterior(psi);
}

PredictiveGaussian posterior_predictive(const Location& target,
                                        const std::vector<SensorSummary>& summaries,
                                        const DistortionParams& psi, const GpModel& gp) {
    const MixturePrior trivial = MixturePrior::homogeneous(summaries.size(), 1.0, {}, {});
    return CalibrationPosterior(summaries, gp, trivial).predict(target, psi);
}

}  // namespace fieldrec
