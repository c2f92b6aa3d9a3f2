#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "fieldrec/harness/config.hpp"
#include "fieldrec/harness/csv.hpp"
#include "fieldrec/harness/experiment.hpp"
#include "fieldrec/harness/metrics.hpp"
#include "fieldrec/harness/synth.hpp"
#include "fieldrec/posterior.hpp"
#include "oracles.hpp"

using namespace fieldrec;

namespace {

ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.sensors = 8;
    cfg.grid_nx = 4;
    cfg.grid_ny = 4;
    cfg.obs_per_sensor = 5;
    cfg.snr_db = 10.0;
    cfg.replicates = 2;
    cfg.seed = 77;
    cfg.truth.gain = 1.3;
    cfg.truth.offset = 4.0;
    return cfg;
}

std::string metrics_text(const ExperimentResult& result) {
    std::ostringstream os;
    write_metrics_csv(os, result.rows);
    return os.str();
}

double mean_rel_mse(const std::vector<MetricsRow>& rows, const std::string& method) {
    oracle::MeanAccumulator acc;
    for (const auto& r : rows)
        if (r.method == method && r.status == "ok") acc.add(r.rel_mse);
    REQUIRE(acc.n > 0);
    return acc.mean;
}

}  // namespace

// ---------------------------------------------------------------- synthesis

TEST_CASE("per-reading noise variance realizes the requested aggregate snr") {
    CHECK(snr_to_noise_var(0.0, 1, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(snr_to_noise_var(20.0, 100, 100.0) == doctest::Approx(100.0).epsilon(1e-14));
    CHECK(snr_to_noise_var(15.0, 50, 100.0) ==
          doctest::Approx(158.11388300841898).epsilon(1e-14));
    CHECK_THROWS_AS(snr_to_noise_var(10.0, 0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(snr_to_noise_var(10.0, 5, 0.0), std::invalid_argument);
}

TEST_CASE("grid construction includes endpoints and runs x1 fastest") {
    const auto single = make_grid(0.0, 2.0, 1, 1);
    REQUIRE(single.size() == 1);
    CHECK(single[0][0] == 1.0);
    CHECK(single[0][1] == 1.0);

    const auto grid = make_grid(0.0, 1.0, 10.0, 12.0, 3, 2);
    REQUIRE(grid.size() == 6);
    CHECK(grid[0] == Location(0.0, 10.0));
    CHECK(grid[1] == Location(0.5, 10.0));
    CHECK(grid[2] == Location(1.0, 10.0));
    CHECK(grid[3] == Location(0.0, 12.0));
    CHECK(grid[5] == Location(1.0, 12.0));

    const auto square = make_grid(0.0, 1.0, 2, 2);
    CHECK(square == make_grid(0.0, 1.0, 0.0, 1.0, 2, 2));
    CHECK_THROWS_AS(make_grid(0.0, 1.0, 0, 2), std::invalid_argument);
    CHECK_THROWS_AS(make_grid(1.0, 0.0, 2, 2), std::invalid_argument);
}

TEST_CASE("sensor placement stays in the domain and follows the stream") {
    Rng a(21), b(21), c(22);
    const auto pa = place_sensors(50, -2.0, 3.0, a);
    const auto pb = place_sensors(50, -2.0, 3.0, b);
    const auto pc = place_sensors(50, -2.0, 3.0, c);
    REQUIRE(pa.size() == 50);
    for (const auto& p : pa) {
        CHECK(p[0] >= -2.0);
        CHECK(p[0] < 3.0);
        CHECK(p[1] >= -2.0);
        CHECK(p[1] < 3.0);
    }
    CHECK(pa == pb);
    CHECK(pa != pc);
}

TEST_CASE("distortion truth draws hit the rounded sensor count") {
    PriorSpec prior;
    TruthSpec truth;
    truth.proportion = 0.0;
    Rng rng(23);
    for (const auto& p : sample_truth(truth, prior, 10, rng)) CHECK(p.is_default);

    truth.proportion = 1.0;
    const auto all = sample_truth(truth, prior, 10, rng);
    for (const auto& p : all) {
        CHECK_FALSE(p.is_default);
        CHECK(p.gain == 1.2);
        CHECK(p.offset == 6.0);
    }

    truth.proportion = 0.5;
    const auto half = sample_truth(truth, prior, 10, rng);
    int off = 0;
    for (const auto& p : half) off += p.is_default ? 0 : 1;
    CHECK(off == 5);

    // rounding is half-away-from-zero: 2.5 -> 3 of 5
    const auto odd = sample_truth(truth, prior, 5, rng);
    off = 0;
    for (const auto& p : odd) off += p.is_default ? 0 : 1;
    CHECK(off == 3);
}

TEST_CASE("prior-mode truth uses the continuous categories with equal probability") {
    PriorSpec prior;
    prior.components.clear();
    prior.components.push_back({0.25, 0.0, 0.01, 50.0, 0.01});
    prior.components.push_back({0.25, 0.0, 0.01, -50.0, 0.01});
    TruthSpec truth;
    truth.mode = TruthSpec::Mode::prior;
    truth.proportion = 1.0;

    Rng rng(24);
    const int n = 1000;
    const auto psi = sample_truth(truth, prior, n, rng);
    int plus = 0;
    for (const auto& p : psi) {
        CHECK_FALSE(p.is_default);
        CHECK(std::abs(std::log(p.gain)) < 0.1);
        plus += p.offset > 0.0 ? 1 : 0;
    }
    // equal categories: SE of the count is sqrt(n/4) ~ 15.8
    CHECK(std::abs(plus - 500) <= 4.0 * std::sqrt(n / 4.0));

    PriorSpec empty;
    empty.components.clear();
    CHECK_THROWS_AS(sample_truth(truth, empty, 5, rng), std::invalid_argument);
}

TEST_CASE("observation sampling applies the distortion exactly when noise is off") {
    const std::vector<Location> pts{Location(0.1, 0.2), Location(0.7, 0.9)};
    Vector field(2);
    field << 11.0, 8.5;
    DistortionParams psi{SensorParams::continuous(1.5, 5.0), SensorParams::atom()};
    Rng rng(25);
    const ObservationSet obs = sample_observations(pts, field, psi, 3, 0.0, rng);
    REQUIRE(obs.raw.size() == 2);
    for (double v : obs.raw[0]) CHECK(v == 1.5 * 11.0 + 5.0);
    for (double v : obs.raw[1]) CHECK(v == 8.5);
    CHECK(obs.summaries[0].count == 3);
    CHECK(obs.summaries[0].sum == doctest::Approx(3 * 21.5).epsilon(1e-15));
    CHECK(obs.summaries[1].location == pts[1]);

    CHECK_THROWS_AS(sample_observations(pts, field, psi, 0, 1.0, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_observations(pts, Vector::Zero(3), psi, 3, 1.0, rng),
                    std::invalid_argument);
}

TEST_CASE("world generation is reproducible and honors the truth settings") {
    ExperimentConfig cfg = small_config();
    cfg.truth.proportion = 0.0;
    const Rng master(cfg.seed);
    const SyntheticWorld w1 = generate_world(cfg, master);
    const SyntheticWorld w2 = generate_world(cfg, Rng(cfg.seed));
    CHECK(w1.sensors == w2.sensors);
    CHECK(w1.field_sensors == w2.field_sensors);
    CHECK(w1.field_grid == w2.field_grid);
    CHECK(w1.observations.raw == w2.observations.raw);
    for (const auto& p : w1.truth) CHECK(p.is_default);
    CHECK(w1.grid.size() == 16);
    CHECK(w1.field_grid.size() == 16);

    const SyntheticWorld w3 = generate_world(cfg, Rng(cfg.seed + 1));
    CHECK(w1.field_sensors != w3.field_sensors);
}

TEST_CASE("placement and field ignore the truth stream") {
    ExperimentConfig cfg = small_config();
    cfg.truth.proportion = 0.2;
    const SyntheticWorld w1 = generate_world(cfg, Rng(cfg.seed));
    cfg.truth.proportion = 0.9;
    cfg.truth.offset = -3.0;
    const SyntheticWorld w2 = generate_world(cfg, Rng(cfg.seed));
    CHECK(w1.sensors == w2.sensors);
    CHECK(w1.field_sensors == w2.field_sensors);
    CHECK(w1.field_grid == w2.field_grid);
}

TEST_CASE("effectively infinite snr reduces observations to the distorted field") {
    ExperimentConfig cfg = small_config();
    cfg.snr_db = 1e6;
    const SyntheticWorld w = generate_world(cfg, Rng(5));
    for (std::size_t i = 0; i < w.observations.raw.size(); ++i) {
        const double want = apply_distortion(w.field_sensors[static_cast<Eigen::Index>(i)],
                                             w.truth[i]);
        for (double v : w.observations.raw[i]) CHECK(std::abs(v - want) <= 1e-6);
    }
}

// ------------------------------------------------------------------ metrics

TEST_CASE("relative mse normalizes by the prior variance") {
    Vector truth(4);
    truth << 1.0, 2.0, 3.0, 4.0;
    CHECK(relative_mse(truth, truth, 25.0) == 0.0);
    const Vector shifted = truth.array() + 5.0;
    CHECK(relative_mse(truth, shifted, 25.0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(relative_mse(truth, Vector::Zero(3), 25.0), std::invalid_argument);
    CHECK_THROWS_AS(relative_mse(Vector(), Vector(), 25.0), std::invalid_argument);
    CHECK_THROWS_AS(relative_mse(truth, truth, 0.0), std::invalid_argument);
}

TEST_CASE("classification rates count both error directions") {
    const std::vector<bool> truth{true, true, false, false, false};
    const std::vector<bool> est{true, false, true, false, false};
    const ClassificationRates r = classification_rates(truth, est);
    CHECK(r.fnr == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.fpr == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(r.fpr_defined);
    CHECK(r.fnr_defined);

    const ClassificationRates all_clean =
        classification_rates({false, false}, {true, true});
    CHECK(all_clean.fpr == 1.0);
    CHECK_FALSE(all_clean.fnr_defined);
    CHECK(all_clean.fnr == 0.0);

    const ClassificationRates all_distort = classification_rates({true, true}, {true, false});
    CHECK_FALSE(all_distort.fpr_defined);
    CHECK(all_distort.fpr == 0.0);
    CHECK(all_distort.fnr == 0.5);

    CHECK_THROWS_AS(classification_rates({true}, {true, false}), std::invalid_argument);
}

TEST_CASE("metric rows format exactly one csv line") {
    CHECK(metrics_header() ==
          "method,replicate,rel_mse,fpr,fnr,fpr_defined,fnr_defined,status,config");

    MetricsRow row;
    row.method = "m";
    row.replicate = 3;
    row.rel_mse = 0.25;
    row.config_echo = "e";
    ClassificationRates r;
    r.fpr = 0.5;
    r.fnr = 0.0;
    row.rates = r;
    CHECK(metrics_line(row) == "m,3,0.25,0.5,0,1,1,ok,e");

    row.rates.reset();
    CHECK(metrics_line(row) == "m,3,0.25,,,,,ok,e");

    row.status = "error:boom";
    CHECK(metrics_line(row) == "m,3,,,,,,error:boom,e");
}

TEST_CASE("metric assembly attaches rates only when both flag sets exist") {
    Vector truth(2), est(2);
    truth << 1.0, 2.0;
    est << 1.0, 3.0;
    const std::vector<bool> tf{true, false}, ef{true, true};
    const MetricsRow with = compute_metrics("cem", 7, truth, est, 4.0, &tf, &ef);
    CHECK(with.replicate == 7);
    CHECK(with.rel_mse == doctest::Approx(0.125).epsilon(1e-15));
    REQUIRE(with.rates.has_value());
    CHECK(with.rates->fpr == 1.0);
    const MetricsRow without = compute_metrics("naive", 0, truth, est, 4.0, nullptr, nullptr);
    CHECK_FALSE(without.rates.has_value());
}

// --------------------------------------------------------------- experiment

TEST_CASE("experiment runs are byte-identical for a fixed seed") {
    ExperimentConfig cfg = small_config();
    cfg.methods = {"oracle", "naive", "sblue", "cem", "icm", "ds-blue", "deb-cem", "deb-icm"};
    cfg.clusters = 2;
    cfg.cem_samples = 120;
    cfg.cem_elite = 0.05;
    cfg.cem_max_iterations = 5;
    cfg.icm_restarts = 1;
    cfg.truth.redraw_each_replicate = true;

    const std::string first = metrics_text(run_experiment(cfg));
    const std::string second = metrics_text(run_experiment(cfg));
    CHECK(first == second);
    CHECK(first.find("error") == std::string::npos);

    const auto rows = run_experiment(cfg).rows;
    REQUIRE(rows.size() == cfg.methods.size() * static_cast<std::size_t>(cfg.replicates));
    for (const auto& row : rows) {
        CHECK(row.status == "ok");
        CHECK_FALSE(row.config_echo.empty());
        const bool has_flags =
            row.method == "cem" || row.method == "icm" || row.method == "deb-cem" ||
            row.method == "deb-icm";
        CHECK(row.rates.has_value() == has_flags);
    }
}

TEST_CASE("undistorted worlds make the naive estimator an exact oracle") {
    ExperimentConfig cfg = small_config();
    cfg.truth.proportion = 0.0;
    cfg.methods = {"oracle", "naive"};
    cfg.replicates = 3;
    const auto rows = run_experiment(cfg).rows;
    REQUIRE(rows.size() == 6);
    for (int r = 0; r < 3; ++r) {
        const auto& oracle_row = rows[static_cast<std::size_t>(2 * r)];
        const auto& naive_row = rows[static_cast<std::size_t>(2 * r + 1)];
        REQUIRE(oracle_row.method == "oracle");
        REQUIRE(naive_row.method == "naive");
        CHECK(oracle_row.rel_mse == naive_row.rel_mse);
    }
}

TEST_CASE("oracle accuracy ignores the distortion strength but naive suffers") {
    ExperimentConfig cfg = small_config();
    cfg.sensors = 12;
    cfg.obs_per_sensor = 10;
    cfg.replicates = 4;
    cfg.methods = {"oracle", "naive"};
    cfg.truth.proportion = 0.5;

    cfg.truth.offset = 0.0;
    const auto rows_low = run_experiment(cfg).rows;
    cfg.truth.offset = 8.0;
    const auto rows_high = run_experiment(cfg).rows;

    const double oracle_low = mean_rel_mse(rows_low, "oracle");
    const double oracle_high = mean_rel_mse(rows_high, "oracle");
    // the oracle divides the offset back out, so only rounding differs
    CHECK(std::abs(oracle_low - oracle_high) <= 1e-6 * oracle_low);
    CHECK(mean_rel_mse(rows_high, "naive") > mean_rel_mse(rows_low, "naive"));
    CHECK(mean_rel_mse(rows_low, "naive") > oracle_low);
}

TEST_CASE("per-method failures are recorded and the run continues") {
    ExperimentConfig cfg = small_config();
    cfg.methods = {"cem", "naive"};
    cfg.replicates = 2;
    cfg.cem_samples = 10;   // violates the elite-fraction requirement at run time
    cfg.cem_elite = 0.01;
    const auto rows = run_experiment(cfg).rows;
    REQUIRE(rows.size() == 4);
    for (const auto& row : rows) {
        if (row.method == "cem") {
            CHECK(row.status.rfind("error:", 0) == 0);
        } else {
            CHECK(row.status == "ok");
        }
    }
    std::ostringstream os;
    write_metrics_csv(os, rows);
    CHECK(os.str().find("cem,0,,,,,,error:") != std::string::npos);
}

TEST_CASE("experiment rejects unknown methods up front") {
    ExperimentConfig cfg = small_config();
    cfg.methods = {"oracle", "bogus"};
    CHECK_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("estimators order as expected under moderate distortion [slow]") {
    ExperimentConfig cfg;
    cfg.sensors = 40;
    cfg.grid_nx = 20;
    cfg.grid_ny = 20;
    cfg.obs_per_sensor = 50;
    cfg.snr_db = 15.0;
    cfg.replicates = 30;
    cfg.seed = 2026;
    cfg.methods = {"oracle", "naive", "sblue", "cem"};
    cfg.truth.proportion = 0.5;
    cfg.truth.gain = 1.2;
    cfg.truth.offset = 6.0;
    cfg.cem_samples = 600;
    cfg.cem_elite = 0.02;
    cfg.cem_max_iterations = 30;

    const auto rows = run_experiment(cfg).rows;
    oracle::MeanAccumulator cem_minus_oracle, sblue_minus_oracle, naive_minus_sblue;
    for (int r = 0; r < cfg.replicates; ++r) {
        double by_method[4] = {0, 0, 0, 0};
        for (std::size_t m = 0; m < 4; ++m) {
            const auto& row = rows[static_cast<std::size_t>(r) * 4 + m];
            REQUIRE(row.status == "ok");
            by_method[m] = row.rel_mse;
        }
        cem_minus_oracle.add(by_method[3] - by_method[0]);
        sblue_minus_oracle.add(by_method[2] - by_method[0]);
        naive_minus_sblue.add(by_method[1] - by_method[2]);
    }
    CHECK(cem_minus_oracle.mean >= cem_minus_oracle.se());
    CHECK(sblue_minus_oracle.mean >= sblue_minus_oracle.se());
    CHECK(naive_minus_sblue.mean >= naive_minus_sblue.se());
}

// ------------------------------------------------------------------- config

TEST_CASE("config text parsing covers every key and strips comments") {
    const ExperimentConfig defaults = parse_config_text("");
    CHECK(defaults.sensors == 100);
    CHECK(defaults.grid_nx == 100);
    CHECK(defaults.variance == 100.0);
    CHECK(defaults.lengthscale == 0.3);
    CHECK(defaults.mean == 10.0);
    CHECK(defaults.methods == std::vector<std::string>{"oracle", "naive", "sblue"});
    CHECK(defaults.prior.atom_weight == 0.5);
    REQUIRE(defaults.prior.components.size() == 1);
    CHECK(defaults.prior.components[0].weight == 0.5);

    const std::string text = R"(# full configuration
sensors = 12
domain_lo = -1.0
domain_hi = 2.0
grid_nx = 7
grid_ny = 9
mean = 4.5          # trailing comment
variance = 64
lengthscale = 0.4
obs_per_sensor = 25
snr_db = 12.5
replicates = 3
methods = oracle, cem , icm
clusters = 2
seed = 99
prior_atom_weight = 0.4
prior_component_1 = 0.35:0.2:0.15:5:2.5
prior_component_2 = 0.25:-0.3:0.2:-2:1.5
truth_mode = prior
proportion = 0.75
truth_gain = 1.1
truth_offset = 3.5
redraw_distortion = yes
cem_samples = 500
cem_elite = 0.05
cem_max_iterations = 20
icm_restarts = 2
)";
    const ExperimentConfig cfg = parse_config_text(text);
    CHECK(cfg.sensors == 12);
    CHECK(cfg.domain_lo == -1.0);
    CHECK(cfg.domain_hi == 2.0);
    CHECK(cfg.grid_nx == 7);
    CHECK(cfg.grid_ny == 9);
    CHECK(cfg.mean == 4.5);
    CHECK(cfg.variance == 64.0);
    CHECK(cfg.lengthscale == 0.4);
    CHECK(cfg.obs_per_sensor == 25);
    CHECK(cfg.snr_db == 12.5);
    CHECK(cfg.replicates == 3);
    CHECK(cfg.methods == std::vector<std::string>{"oracle", "cem", "icm"});
    CHECK(cfg.clusters == 2);
    CHECK(cfg.seed == 99);
    CHECK(cfg.prior.atom_weight == 0.4);
    REQUIRE(cfg.prior.components.size() == 2);
    CHECK(cfg.prior.components[0].weight == 0.35);
    CHECK(cfg.prior.components[0].mean_log_gain == 0.2);
    CHECK(cfg.prior.components[1].mean_offset == -2.0);
    CHECK(cfg.truth.mode == TruthSpec::Mode::prior);
    CHECK(cfg.truth.proportion == 0.75);
    CHECK(cfg.truth.redraw_each_replicate);
    CHECK(cfg.cem_samples == 500);
    CHECK(cfg.cem_elite == 0.05);
    CHECK(cfg.cem_max_iterations == 20);
    CHECK(cfg.icm_restarts == 2);

    // changing only the atom weight rebalances the lone default component
    const ExperimentConfig tilted = parse_config_text("prior_atom_weight = 0.3\n");
    CHECK(tilted.prior.components[0].weight == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("config parsing rejects malformed input") {
    CHECK_THROWS_AS(parse_config_text("nonsense = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("sensors\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("sensors =\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("sensors = twelve\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("snr_db = 1.2.3\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("redraw_distortion = maybe\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("prior_component_1 = 0.5:0:0.1:6\n"),
                    std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("prior_component_2 = 0.5:0:0.1:6:3\n"),
                    std::invalid_argument);  // numbering must start at 1
    CHECK_THROWS_AS(parse_config_text("methods = oracle, warlock\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("sensors = 0\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("proportion = 1.5\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("truth_gain = -1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("clusters = 200\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config_text("domain_hi = 0\n"), std::invalid_argument);
    // prior weights must sum to one
    CHECK_THROWS_AS(
        parse_config_text("prior_atom_weight = 0.5\nprior_component_1 = 0.8:0:0.1:6:3\n"),
        std::invalid_argument);
}

TEST_CASE("config files load from disk and gp model derives its noise") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "fieldrec_test_cfg";
    fs::create_directories(dir);
    const fs::path file = dir / "exp.cfg";
    {
        std::ofstream out(file);
        out << "sensors = 5\nsnr_db = 15\nobs_per_sensor = 50\nvariance = 100\n";
    }
    const ExperimentConfig cfg = load_config_file(file.string());
    CHECK(cfg.sensors == 5);
    const GpModel gp = cfg.gp_model();
    CHECK(gp.noise_var == doctest::Approx(158.11388300841898).epsilon(1e-14));
    CHECK(gp.mean(Location(0.3, 0.4)) == 10.0);
    CHECK(gp.kernel.variance == 100.0);

    CHECK_THROWS_AS(load_config_file((dir / "missing.cfg").string()), std::invalid_argument);
    fs::remove_all(dir);

    const std::string echo = cfg.echo();
    CHECK(echo.find("sensors=5") != std::string::npos);
    CHECK(echo.find("seed=") != std::string::npos);
    CHECK(echo.find(',') == std::string::npos);  // echo must stay a single csv field
}

// ---------------------------------------------------------------------- csv

TEST_CASE("csv line splitting honors quotes and escapes") {
    CHECK(split_csv_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
    CHECK(split_csv_line("a,,c") == std::vector<std::string>{"a", "", "c"});
    CHECK(split_csv_line("\"a,b\",c") == std::vector<std::string>{"a,b", "c"});
    CHECK(split_csv_line("\"he said \"\"hi\"\"\",x") ==
          std::vector<std::string>{"he said \"hi\"", "x"});
    CHECK(split_csv_line("") == std::vector<std::string>{""});
}

TEST_CASE("observation tables round-trip through csv") {
    SensorData data;
    data.ids = {"s1", "s2"};
    data.locations = {Location(0.125, 0.5), Location(1.75, -2.25)};
    data.observations = {{10.5, 11.25}, {9.0}};

    std::ostringstream out;
    write_observations_csv(out, data);
    std::istringstream in(out.str());
    const SensorData back = read_observations_csv(in);
    CHECK(back.ids == data.ids);
    CHECK(back.locations == data.locations);
    CHECK(back.observations == data.observations);

    std::istringstream conflicting(
        "sensor_id,x1,x2,value\na,0,0,1\na,0,1,2\n");
    CHECK_THROWS_AS(read_observations_csv(conflicting), std::invalid_argument);
    std::istringstream missing_col("sensor_id,x1,value\na,0,1\n");
    CHECK_THROWS_AS(read_observations_csv(missing_col), std::invalid_argument);
    std::istringstream short_row("sensor_id,x1,x2,value\na,0,0\n");
    CHECK_THROWS_AS(read_observations_csv(short_row), std::invalid_argument);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_observations_csv(empty), std::invalid_argument);
    std::istringstream header_only("sensor_id,x1,x2,value\n");
    CHECK_THROWS_AS(read_observations_csv(header_only), std::invalid_argument);
}

TEST_CASE("location tables accept both planar and geographic headers") {
    std::istringstream planar("sensor_id,x1,x2\na,0.5,0.25\nb,1,2\n");
    const NamedLocations p = read_locations_csv(planar);
    CHECK(p.ids == std::vector<std::string>{"a", "b"});
    CHECK(p.coords[1] == Location(1.0, 2.0));

    std::istringstream geo("sensor_id,longitude,latitude\na,-122.25,47.5\n");
    const NamedLocations g = read_locations_csv(geo);
    CHECK(g.coords[0] == Location(-122.25, 47.5));

    std::ostringstream out;
    write_locations_csv(out, g, true);
    CHECK(out.str() == "sensor_id,longitude,latitude\na,-122.25,47.5\n");

    std::istringstream dup("sensor_id,x1,x2\na,0,0\na,1,1\n");
    CHECK_THROWS_AS(read_locations_csv(dup), std::invalid_argument);
}

TEST_CASE("grid tables carry optional truth and variance columns") {
    GridTable table;
    table.points = {Location(0.0, 0.0), Location(0.5, 0.0)};
    table.estimate = Vector(2);
    table.estimate << 10.5, 11.25;
    table.truth = Vector(2);
    *table.truth << 10.0, 11.0;
    table.predictive_var = Vector(2);
    *table.predictive_var << 1.5, 2.5;

    std::ostringstream out;
    write_grid_csv(out, table);
    CHECK(out.str().rfind("x1,x2,truth,estimate,predictive_var\n", 0) == 0);
    std::istringstream in(out.str());
    const GridTable back = read_grid_csv(in);
    CHECK(back.points == table.points);
    CHECK(back.estimate == table.estimate);
    REQUIRE(back.truth.has_value());
    CHECK(*back.truth == *table.truth);
    REQUIRE(back.predictive_var.has_value());
    CHECK(*back.predictive_var == *table.predictive_var);

    GridTable minimal;
    minimal.points = {Location(1.0, 2.0)};
    minimal.estimate = Vector::Constant(1, 3.5);
    std::ostringstream out2;
    write_grid_csv(out2, minimal);
    CHECK(out2.str() == "x1,x2,estimate\n1,2,3.5\n");
    std::istringstream in2(out2.str());
    const GridTable back2 = read_grid_csv(in2);
    CHECK_FALSE(back2.truth.has_value());
    CHECK_FALSE(back2.predictive_var.has_value());

    GridTable bad = minimal;
    bad.points.clear();
    std::ostringstream sink;
    CHECK_THROWS_AS(write_grid_csv(sink, bad), std::invalid_argument);
}

TEST_CASE("partition and flag tables round-trip and validate") {
    ClusterPartition part;
    part.assignment = {2, 1, 2};
    part.n_clusters = 2;
    std::ostringstream out;
    write_partition_csv(out, {"a", "b", "c"}, part);
    CHECK(out.str() == "sensor_id,cluster_id\na,2\nb,1\nc,2\n");
    std::istringstream in(out.str());
    const NamedPartition back = read_partition_csv(in);
    CHECK(back.ids == std::vector<std::string>{"a", "b", "c"});
    CHECK(back.cluster == std::vector<std::size_t>{2, 1, 2});
    std::istringstream zero("sensor_id,cluster_id\na,0\n");
    CHECK_THROWS_AS(read_partition_csv(zero), std::invalid_argument);
    std::istringstream frac("sensor_id,cluster_id\na,1.5\n");
    CHECK_THROWS_AS(read_partition_csv(frac), std::invalid_argument);

    std::ostringstream fout;
    write_flags_csv(fout, {"a", "b"}, {true, false});
    CHECK(fout.str() == "sensor_id,flag\na,1\nb,0\n");
    std::istringstream fin(fout.str());
    CHECK(read_flags_csv(fin) == std::vector<bool>{true, false});
    std::istringstream badflag("sensor_id,flag\na,2\n");
    CHECK_THROWS_AS(read_flags_csv(badflag), std::invalid_argument);

    const DistortionParams psi{SensorParams::atom(), SensorParams::continuous(1.25, -3.5)};
    std::ostringstream pout;
    write_psi_csv(pout, {"a", "b"}, psi);
    CHECK(pout.str() == "sensor_id,is_default,gain,offset\na,1,1,0\nb,0,1.25,-3.5\n");
}

TEST_CASE("archive ingest filters outliers and duplicates with warnings") {
    // 77 F = 25 C, 257 F = 125 C (outlier), 32 F = 0 C, 50 F = 10 C
    const std::string text =
        "State.Code,County.Code,Site.Num,Longitude,Latitude,Date.Local,X1st.Max.Value,Extra\n"
        "06,001,0007,-122.0,37.5,2021-06-01,77,x\n"
        "06,001,0007,-122.0,37.5,2021-06-02,257,x\n"
        "06,001,0007,-122.0,37.5,2021-06-02,50,x\n"
        "06,001,0007,-122.0,37.5,2021-06-02,59,x\n"
        "06,003,0001,-121.5,38.0,2021-06-01,32,x\n"
        "06,003,0001,-121.5,38.0,2021-06-03,notanumber,x\n"
        "06,003,0001,-121.5,38.0,2021-06-03\n"
        "06,003,0001,-121.5,38.0,2021-06-03,50,x\n";
    std::istringstream in(text);
    const IngestResult res = ingest_epa_csv(in, IngestOptions{});
    CHECK(res.rows_read == 8);
    CHECK(res.outliers == 1);      // the 125 C reading
    CHECK(res.duplicates == 1);    // second kept-range reading for site 1 on 06-02
    CHECK(res.malformed == 2);     // bad number + short row
    CHECK(res.warnings.size() == 2);
    CHECK(res.kept == 4);
    REQUIRE(res.data.size() == 2);
    CHECK(res.data.ids[0] == "06-001-0007");
    CHECK(res.data.locations[0] == Location(-122.0, 37.5));
    CHECK(res.data.observations[0] == std::vector<double>{25.0, 10.0});
    CHECK(res.data.observations[1] == std::vector<double>{0.0, 10.0});
    // 2 sites x 3 distinct kept dates, 4 cells filled
    CHECK(res.missing_fraction == doctest::Approx(1.0 - 4.0 / 6.0).epsilon(1e-15));

    std::istringstream again(text);
    IngestOptions prefix;
    prefix.date_prefix = "2021-06-01";
    const IngestResult only_first = ingest_epa_csv(again, prefix);
    CHECK(only_first.kept == 2);
    CHECK(only_first.outliers == 0);

    std::istringstream celsius_in("State.Code,County.Code,Site.Num,Longitude,Latitude,"
                                  "Date.Local,X1st.Max.Value\n1,2,3,0,0,2021-01-01,25\n");
    IngestOptions celsius;
    celsius.fahrenheit = false;
    CHECK(ingest_epa_csv(celsius_in, celsius).data.observations[0][0] == 25.0);

    std::istringstream none("State.Code,County.Code,Site.Num,Longitude,Latitude,"
                            "Date.Local,X1st.Max.Value\n1,2,3,0,0,2021-01-01,500\n");
    CHECK_THROWS_AS(ingest_epa_csv(none, IngestOptions{}), std::invalid_argument);
    std::istringstream empty("");
    CHECK_THROWS_AS(ingest_epa_csv(empty, IngestOptions{}), std::invalid_argument);
    IngestOptions bad;
    bad.min_value = 5.0;
    bad.max_value = 1.0;
    std::istringstream dummy("x\n");
    CHECK_THROWS_AS(ingest_epa_csv(dummy, bad), std::invalid_argument);
}
