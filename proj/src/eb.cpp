#include "fieldrec/eb.hpp"

namespace fieldrec {

std::pair<double, double> eb_predict(const Location& target,
                                     const std::vector<SensorSummary>& summaries,
                                     const DistortionParams& psi_hat, const GpModel& gp,
                                     Loss loss) {
    (void)loss;  // Gaussian predictive: same point estimate under all losses
    const PredictiveGaussian p = posterior_predictive(target, summaries, psi_hat, gp);
    return {p.mean, p.variance};
}

std::pair<double, double> eb_predict(const Location& target, const CalibrationPosterior& post,
                                     const DistortionParams& psi_hat, Loss loss) {
    (void)loss;
    const PredictiveGaussian p = post.predict(target, psi_hat);
    return {p.mean, p.variance};
}

}  // namespace fieldrec
