#include <cmath>
#include <vector>

#include <doctest.h>

#include "fieldrec/cem.hpp"
#include "oracles.hpp"

using namespace fieldrec;

namespace {

MixtureComponent component(double mean_lg, double mean_b, double var_lg, double var_b,
                           double cov_lgb = 0.0) {
    MixtureComponent c;
    c.mean << mean_lg, mean_b;
    c.cov << var_lg, cov_lgb, cov_lgb, var_b;
    return c;
}

MixturePrior half_atom_prior(std::size_t n_sensors) {
    return MixturePrior::homogeneous(n_sensors, 0.5, {0.5},
                                     {component(0.25, 6.0, 0.01, 9.0)});
}

}  // namespace

TEST_CASE("elite threshold rank follows the ceiling convention") {
    CHECK(elite_threshold_rank(1000, 0.01) == 990);
    CHECK(elite_threshold_rank(5, 0.2) == 4);
    CHECK(elite_threshold_rank(100, 0.5) == 50);
    CHECK(elite_threshold_rank(1000, 0.001) == 999);
}

TEST_CASE("proposal initialized from the prior copies it per sensor") {
    const MixturePrior prior = MixturePrior::homogeneous(
        3, 0.2, {0.5, 0.3},
        {component(0.25, 6.0, 0.01, 9.0), component(-0.3, -2.0, 0.04, 4.0)});
    const SamplerParams sampler = SamplerParams::from_prior(prior);
    CHECK(sampler.sensor_count() == 3);
    CHECK(sampler.component_count() == 2);
    CHECK((sampler.weights - prior.weights).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t k = 0; k < 2; ++k) {
            CHECK(sampler.components[n][k].mean == prior.components[k].mean);
            CHECK(sampler.components[n][k].cov == prior.components[k].cov);
        }
}

TEST_CASE("all-atom samples push the atom weight to one and leave components alone") {
    const MixturePrior prior = half_atom_prior(2);
    const SamplerParams init = SamplerParams::from_prior(prior);
    std::vector<DistortionParams> samples(50, all_default(2));
    const EmResult result = em_fit_mixture(samples, init);
    for (std::size_t n = 0; n < 2; ++n) {
        CHECK(result.params.weights(static_cast<Eigen::Index>(n), 0) == 1.0);
        CHECK(result.params.weights(static_cast<Eigen::Index>(n), 1) == 0.0);
        CHECK(result.params.components[n][0].mean == init.components[n][0].mean);
        CHECK(result.params.components[n][0].cov == init.components[n][0].cov);
    }
}

TEST_CASE("atom-free samples zero the atom weight") {
    const MixturePrior prior = half_atom_prior(1);
    Rng rng(91);
    std::vector<DistortionParams> samples;
    for (int i = 0; i < 200; ++i)
        samples.push_back({SensorParams::continuous(std::exp(rng.normal(0.2, 0.1)),
                                                    rng.normal(5.0, 1.0))});
    const EmResult result = em_fit_mixture(samples, SamplerParams::from_prior(prior));
    CHECK(result.params.weights(0, 0) == 0.0);
    CHECK(result.params.weights(0, 1) == 1.0);
}

TEST_CASE("the mixture fit recovers two well-separated clusters") {
    Rng rng(92);
    std::vector<DistortionParams> samples;
    for (int i = 0; i < 500; ++i) {
        samples.push_back({SensorParams::continuous(std::exp(rng.normal(-0.4, 0.1)),
                                                    rng.normal(0.0, 0.1))});
        samples.push_back({SensorParams::continuous(std::exp(rng.normal(0.2, 0.1)),
                                                    rng.normal(10.0, 0.1))});
    }
    const MixturePrior init_prior = MixturePrior::homogeneous(
        1, 0.0, {0.5, 0.5},
        {component(-0.5, -2.0, 1.0, 4.0), component(0.3, 12.0, 1.0, 4.0)});
    const EmResult result = em_fit_mixture(samples, SamplerParams::from_prior(init_prior));

    // components are identifiable up to order; match by offset sign
    const auto& c0 = result.params.components[0][0];
    const auto& c1 = result.params.components[0][1];
    const auto& low = c0.mean[1] < c1.mean[1] ? c0 : c1;
    const auto& high = c0.mean[1] < c1.mean[1] ? c1 : c0;
    CHECK(std::abs(low.mean[0] - (-0.4)) < 0.05);
    CHECK(std::abs(low.mean[1] - 0.0) < 0.05);
    CHECK(std::abs(high.mean[0] - 0.2) < 0.05);
    CHECK(std::abs(high.mean[1] - 10.0) < 0.05);
    CHECK(result.params.weights(0, 1) == doctest::Approx(0.5).epsilon(0.1));
}

TEST_CASE("mixture-fit log likelihood never decreases across iterations") {
    const MixturePrior sample_prior_spec = MixturePrior::homogeneous(
        2, 0.3, {0.4, 0.3},
        {component(0.25, 6.0, 0.04, 4.0), component(-0.3, -2.0, 0.09, 1.0)});
    const MixturePrior init_prior = half_atom_prior(2);
    for (int run = 0; run < 20; ++run) {
        Rng rng(500 + static_cast<std::uint64_t>(run));
        std::vector<DistortionParams> samples;
        for (int i = 0; i < 100; ++i) samples.push_back(sample_prior(sample_prior_spec, rng));
        const EmResult result = em_fit_mixture(samples, SamplerParams::from_prior(init_prior));
        REQUIRE(!result.log_likelihood_trace.empty());
        for (std::size_t i = 1; i < result.log_likelihood_trace.size(); ++i)
            CHECK(result.log_likelihood_trace[i] >=
                  result.log_likelihood_trace[i - 1] - 1e-10);
    }
}

TEST_CASE("cross-entropy search finds the optimum of a separable quadratic") {
    const MixturePrior prior = MixturePrior::homogeneous(
        3, 0.0, {1.0}, {component(0.0, 4.0, 0.25, 16.0)});
    auto objective = [](const DistortionParams& psi) {
        double j = 0.0;
        for (const auto& p : psi) {
            const double lg = std::log(p.gain);
            j -= (lg - 0.2) * (lg - 0.2) + (p.offset - 5.0) * (p.offset - 5.0);
        }
        return j;
    };
    CemConfig config;
    config.sample_count = 1000;
    config.elite_fraction = 0.01;
    config.max_iterations = 50;
    config.seed = 93;
    const MapEstimate est = cem_optimize(objective, prior, config);
    REQUIRE(est.psi.size() == 3);
    for (const auto& p : est.psi) {
        CHECK(std::abs(std::log(p.gain) - 0.2) < 0.05);
        CHECK(std::abs(p.offset - 5.0) < 0.05);
    }
}

TEST_CASE("an objective maximized at the default calibration returns all defaults") {
    const MixturePrior prior = MixturePrior::homogeneous(
        3, 0.9, {0.1}, {component(0.0, 0.0, 0.25, 1.0)});
    auto objective = [](const DistortionParams& psi) {
        for (const auto& p : psi)
            if (!p.is_default) return -10.0;
        return 0.0;
    };
    CemConfig config;
    config.sample_count = 200;
    config.seed = 94;
    const MapEstimate est = cem_optimize(objective, prior, config);
    CHECK(est.objective == 0.0);
    for (const auto& p : est.psi) CHECK(p.is_default);
}

TEST_CASE("best-so-far objective is monotone across iterations") {
    const MixturePrior prior = half_atom_prior(2);
    for (int run = 0; run < 20; ++run) {
        auto objective = [run](const DistortionParams& psi) {
            double j = 0.0;
            for (const auto& p : psi)
                j -= std::abs(std::log(p.gain) - 0.01 * run) + 0.1 * std::abs(p.offset);
            return j;
        };
        CemConfig config;
        config.sample_count = 100;
        config.max_iterations = 15;
        config.seed = 700 + static_cast<std::uint64_t>(run);
        const MapEstimate est = cem_optimize(objective, prior, config);
        REQUIRE(!est.trace.empty());
        for (std::size_t i = 1; i < est.trace.size(); ++i)
            CHECK(est.trace[i] >= est.trace[i - 1]);
        CHECK(est.objective == est.trace.back());
    }
}

TEST_CASE("first-round candidates are drawn from the prior itself") {
    const MixturePrior prior = half_atom_prior(1);
    std::vector<DistortionParams> seen;
    auto objective = [&seen](const DistortionParams& psi) {
        seen.push_back(psi);
        return 0.0;
    };
    CemConfig config;
    config.sample_count = 4000;
    config.max_iterations = 1;
    config.seed = 95;
    (void)cem_optimize(objective, prior, config);
    REQUIRE(seen.size() == 4000);

    long atoms = 0;
    oracle::MeanAccumulator log_gain, offset;
    for (const auto& psi : seen) {
        if (psi[0].is_default) {
            ++atoms;
        } else {
            log_gain.add(std::log(psi[0].gain));
            offset.add(psi[0].offset);
        }
    }
    const double atom_rate = static_cast<double>(atoms) / 4000.0;
    CHECK(std::abs(atom_rate - 0.5) <= 4.0 * std::sqrt(0.25 / 4000.0));
    CHECK(std::abs(log_gain.mean - 0.25) <= 4.0 * log_gain.se());
    CHECK(std::abs(offset.mean - 6.0) <= 4.0 * offset.se());
}

TEST_CASE("a hopeless objective raises an optimization failure") {
    const MixturePrior prior = half_atom_prior(1);
    auto objective = [](const DistortionParams&) {
        return -std::numeric_limits<double>::infinity();
    };
    CemConfig config;
    config.sample_count = 50;
    config.elite_fraction = 0.1;
    config.seed = 96;
    CHECK_THROWS_AS(cem_optimize(objective, prior, config), OptimizationError);
}

TEST_CASE("cross-entropy configuration is validated") {
    CemConfig bad;
    bad.elite_fraction = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.elite_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.elite_fraction = 0.01;
    bad.sample_count = 50;  // fewer than 1/elite_fraction
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.sample_count = 100;
    CHECK_NOTHROW(bad.validate());
    bad.max_iterations = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
