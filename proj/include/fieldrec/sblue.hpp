#pragma once

#include <vector>

#include "fieldrec/distortion.hpp"
#include "fieldrec/gp.hpp"

namespace fieldrec {

// Entrywise prior moments of the per-sensor gains and offsets.
// Cross-sensor entries use independence; diagonals use the mixture's second
// moments.
struct PriorMoments {
    Vector mean_gain;    // E[a]
    Vector mean_offset;  // E[b]
    Matrix gain_sq;      // E[a a^T]
    Matrix offset_sq;    // E[b b^T]
    Matrix gain_offset;  // E[a b^T]
};
PriorMoments prior_moments(const MixturePrior& prior);

// Affine estimator of the field at one target from the per-sensor observation
// means: prediction = weights . gbar + intercept.
struct SblueModel {
    Vector weights;
    double intercept = 0.0;
    double risk = 0.0;        // Bayes risk of the prediction
    Vector mean_gbar;         // prior mean of the observation means
    Location target = Location::Zero();
};

// Offline phase shared across targets: assembles and factorizes the
// observation-mean covariance once; each target fit is then O(N^2).
class SblueSolver {
public:
    SblueSolver(std::vector<Location> locations, GpModel gp, const MixturePrior& prior,
                std::vector<int> counts);

    SblueModel fit(const Location& target) const;

    const Matrix& obs_mean_cov() const { return cov_gbar_; }
    const Vector& obs_mean_expectation() const { return mean_gbar_; }

private:
    std::vector<Location> locations_;
    GpModel gp_;
    PriorMoments moments_;
    Vector mu_;         // field prior mean at the sensors
    Vector mean_gbar_;  // E[gbar]
    Matrix cov_gbar_;   // Cov[gbar]
    Eigen::LLT<Matrix> cov_llt_;
};

SblueModel sblue_fit(const Location& target, const std::vector<Location>& locations,
                     const GpModel& gp, const MixturePrior& prior,
                     const std::vector<int>& counts);
double sblue_predict(const SblueModel& model, const std::vector<SensorSummary>& summaries);

}  // namespace fieldrec
