#pragma once

#include "fieldrec/posterior.hpp"

namespace fieldrec {

enum class Loss { quadratic, absolute, zero_one };

// Plug-in prediction under an estimated calibration: the conditional
// predictive is Gaussian, so the optimal point estimate coincides for all
// three losses (mean = median = mode).  Returns (point estimate, predictive
// variance).
std::pair<double, double> eb_predict(const Location& target,
                                     const std::vector<SensorSummary>& summaries,
                                     const DistortionParams& psi_hat, const GpModel& gp,
                                     Loss loss);
std::pair<double, double> eb_predict(const Location& target, const CalibrationPosterior& post,
                                     const DistortionParams& psi_hat, Loss loss);

}  // namespace fieldrec
