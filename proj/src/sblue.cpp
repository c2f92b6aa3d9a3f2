#include "fieldrec/sblue.hpp"

#include <algorithm>
#include <cmath>

namespace fieldrec {

PriorMoments prior_moments(const MixturePrior& prior) {
    prior.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(prior.sensor_count());
    const std::size_t kk = prior.component_count();

    Vector ea(n), eb(n), ea2(n), eb2(n), eab(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t ui = static_cast<std::size_t>(i);
        double a = prior.atom_weight(ui), a2 = prior.atom_weight(ui);  // atom: a=1, b=0
        double b = 0.0, b2 = 0.0, ab = 0.0;
        for (std::size_t k = 0; k < kk; ++k) {
            const double q = prior.component_weight(ui, k + 1);
            if (q <= 0.0) continue;
            const MixtureComponent& c = prior.components[k];
            a += q * c.mean_gain();
            a2 += q * c.mean_gain_sq();
            b += q * c.mean_offset();
            b2 += q * c.mean_offset_sq();
            ab += q * c.mean_gain_offset();
        }
        ea[i] = a;
        ea2[i] = a2;
        eb[i] = b;
        eb2[i] = b2;
        eab[i] = ab;
    }

    PriorMoments m;
    m.mean_gain = ea;
    m.mean_offset = eb;
    m.gain_sq = ea * ea.transpose();
    m.gain_sq.diagonal() = ea2;
    m.offset_sq = eb * eb.transpose();
    m.offset_sq.diagonal() = eb2;
    m.gain_offset = ea * eb.transpose();
    m.gain_offset.diagonal() = eab;
    return m;
}

SblueSolver::SblueSolver(std::vector<Location> locations, GpModel gp, const MixturePrior& prior,
                         std::vector<int> counts)
    : locations_(std::move(locations)), gp_(std::move(gp)) {
    gp_.validate();
    if (locations_.empty()) throw std::invalid_argument("sblue: no sensors");
    if (prior.sensor_count() != locations_.size() || counts.size() != locations_.size())
        throw std::invalid_argument("sblue: sensor count mismatch");
    for (int c : counts)
        if (c < 1) throw std::invalid_argument("sblue: observation counts must be >= 1");

    moments_ = prior_moments(prior);
    mu_ = mean_vector(locations_, gp_.mean);
    const Eigen::Index n = static_cast<Eigen::Index>(locations_.size());

    mean_gbar_ = moments_.mean_gain.cwiseProduct(mu_) + moments_.mean_offset;

    Matrix base = build_covariance(locations_, gp_.kernel);
    for (Eigen::Index i = 0; i < n; ++i)
        base(i, i) += gp_.noise_var / static_cast<double>(counts[static_cast<std::size_t>(i)]);
    base += mu_ * mu_.transpose();

    cov_gbar_ = moments_.gain_sq.cwiseProduct(base);
    cov_gbar_ += mu_.asDiagonal() * moments_.gain_offset;
    cov_gbar_ += moments_.gain_offset.transpose() * mu_.asDiagonal();
    cov_gbar_ += moments_.offset_sq;
    cov_gbar_ -= mean_gbar_ * mean_gbar_.transpose();

    const double scale = cov_gbar_.diagonal().cwiseAbs().mean();
    cov_llt_ = jittered_llt(cov_gbar_, scale);
}

SblueModel SblueSolver::fit(const Location& target) const {
    const Vector k = cross_covariance(locations_, target, gp_.kernel);
    const Vector cov_gf = moments_.mean_gain.cwiseProduct(k);
    SblueModel model;
    model.target = target;
    model.weights = cov_llt_.solve(cov_gf);
    model.mean_gbar = mean_gbar_;
    model.intercept = gp_.mean(target) - model.weights.dot(mean_gbar_);
    model.risk = std::max(0.0, gp_.kernel.variance - cov_gf.dot(model.weights));
    return model;
}

SblueModel sblue_fit(const Location& target, const std::vector<Location>& locations,
                     const GpModel& gp, const MixturePrior& prior,
                     const std::vector<int>& counts) {
    return SblueSolver(locations, gp, prior, counts).fit(target);
}

double sblue_predict(const SblueModel& model, const std::vector<SensorSummary>& summaries) {
    if (static_cast<Eigen::Index>(summaries.size()) != model.weights.size())
        throw std::invalid_argument("sblue_predict: sensor count mismatch");
    double acc = model.intercept;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        summaries[i].validate();
        acc += model.weights[static_cast<Eigen::Index>(i)] * summaries[i].mean();
    }
    return acc;
}

}  // namespace fieldrec
