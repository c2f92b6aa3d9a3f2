#include "fieldrec/cem.hpp"

#include <algorithm>
#include <cmath>

namespace fieldrec {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kWeightFloor = 1e-6;

void floor_weights(Matrix& w) {
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        double total = 0.0;
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            w(i, j) = std::max(w(i, j), kWeightFloor);
            total += w(i, j);
        }
        w.row(i) /= total;
    }
}

}  // namespace

void CemConfig::validate() const {
    if (!(elite_fraction > 0.0 && elite_fraction < 1.0))
        throw std::invalid_argument("cem: elite_fraction must be in (0, 1)");
    if (sample_count < 1 ||
        static_cast<double>(sample_count) * elite_fraction < 1.0)
        throw std::invalid_argument("cem: sample_count must be at least 1/elite_fraction");
    if (max_iterations < 1 || stall_iterations < 1)
        throw std::invalid_argument("cem: iteration limits must be positive");
}

int elite_threshold_rank(int sample_count, double elite_fraction) {
    return static_cast<int>(
        std::ceil((1.0 - elite_fraction) * static_cast<double>(sample_count)));
}

MapEstimate cem_optimize(const Objective& objective, const MixturePrior& prior,
                         const CemConfig& config) {
    config.validate();
    prior.validate();
    if (!objective) throw std::invalid_argument("cem: missing objective");

    Rng rng(config.seed);
    SamplerParams sampler = SamplerParams::from_prior(prior);
    const int s = config.sample_count;
    const int quantile_rank = elite_threshold_rank(s, config.elite_fraction);

    MapEstimate best;
    best.objective = kNegInf;
    double marked_best = kNegInf;
    int stall = 0;

    std::vector<DistortionParams> candidates(static_cast<std::size_t>(s));
    std::vector<double> scores(static_cast<std::size_t>(s));
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        bool any_finite = false;
        for (int i = 0; i < s; ++i) {
            candidates[static_cast<std::size_t>(i)] = sample_from(sampler, rng);
            const double v = objective(candidates[static_cast<std::size_t>(i)]);
            scores[static_cast<std::size_t>(i)] = std::isnan(v) ? kNegInf : v;
            any_finite = any_finite || scores[static_cast<std::size_t>(i)] > kNegInf;
        }
        if (!any_finite)
            throw OptimizationError("cem_optimize: every candidate scored -inf");

        for (int i = 0; i < s; ++i) {
            if (scores[static_cast<std::size_t>(i)] > best.objective) {
                best.objective = scores[static_cast<std::size_t>(i)];
                best.psi = candidates[static_cast<std::size_t>(i)];
            }
        }
        best.iterations = iter;
        best.trace.push_back(best.objective);

        std::vector<double> sorted = scores;
        std::nth_element(sorted.begin(), sorted.begin() + (quantile_rank - 1), sorted.end());
        const double threshold = sorted[static_cast<std::size_t>(quantile_rank - 1)];

        std::vector<DistortionParams> elite;
        for (int i = 0; i < s; ++i) {
            const double v = scores[static_cast<std::size_t>(i)];
            if (v >= threshold && v > kNegInf)
                elite.push_back(candidates[static_cast<std::size_t>(i)]);
        }
        if (!elite.empty()) {
            sampler = em_fit_mixture(elite, sampler).params;
            floor_weights(sampler.weights);
        }

        if (best.objective > marked_best + config.stall_tolerance) {
            marked_best = best.objective;
            stall = 0;
        } else if (++stall >= config.stall_iterations) {
            break;
        }
    }
    return best;
}

}  // namespace fieldrec
