#pragma once

#include "offgrid/estimator.hpp"
#include "offgrid/noise.hpp"
#include "offgrid/scenario.hpp"
#include "offgrid/separation.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace offgrid {

/// Configuration of one experiment, read from a JSON file. Defaults follow the gaussian
/// worked example (rho = 2, eta0 = 9/10, shrinkage 0.1).
struct ExperimentConfig {
    ScenarioSpec scenario;

    std::vector<double> amplitudes;
    double gap = std::numeric_limits<double>::quiet_NaN();  // equispaced d-gap
    std::vector<double> theta;                              // explicit placement

    nlohmann::json noise = {{"model", "iid"}, {"sigma", 0.0}};

    enum class KappaRule { explicit_value, tuned };
    KappaRule kappa_rule = KappaRule::explicit_value;
    double kappa = 0.0;
    double C1 = 1.5;
    double tau = std::numeric_limits<double>::quiet_NaN();  // NaN: tau = T

    SolverConfig solver;
    bool solver_cap_set = false;
    double r = 0.49;  // near-region radius for the error decomposition

    std::size_t replications = 200;
    std::uint64_t seed = 1;
    std::string out_dir;
    int jobs = 0;

    std::vector<std::size_t> ladder = {256, 512, 1024, 2048, 4096, 8192};

    double rho = 2.0;
    double eta0 = 0.9;
    int cert_s = 2;
    double cert_gap = 9.0;

    int sep_s = 2;
    double sep_u = std::numeric_limits<double>::quiet_NaN();  // NaN: u_inf of the worked example
    int sep_restarts = 32;
    bool sep_empirical = true;

    std::size_t variance_reps = 2000;
    std::vector<int> tail_orders = {0, 1, 2};
    std::size_t tail_reps = 1000;
    std::vector<double> tail_u;  // empty: 10 points chosen from the sample

    nlohmann::json echo;  // config after overrides, for the manifest
};

/// Schema-checked parse; unknown keys and bad values throw ConfigError.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

/// Build a NoiseModel for the given measure from the "noise" block.
NoiseModel noise_from_json(const nlohmann::json& j, const GridMeasure& m, std::uint64_t seed);

struct RunResult {
    int exit_code = 0;   // 0 pass, 1 a requested check failed
    std::string text;    // human-readable table
    nlohmann::json report;
};

RunResult run_fit(const ExperimentConfig& cfg);
RunResult run_rates(const ExperimentConfig& cfg);
RunResult run_certify(const ExperimentConfig& cfg);
RunResult run_separation(const ExperimentConfig& cfg);
RunResult run_noise_check(const ExperimentConfig& cfg);

/// manifest.json in cfg.out_dir: command, version, seed and the config echo.
void write_manifest(const ExperimentConfig& cfg, const std::string& command);

std::string version();

/// Linear-interpolation quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> v, double p);
/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace offgrid
