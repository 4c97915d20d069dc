#include "offgrid/cli.hpp"
#include "offgrid/errors.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

using namespace offgrid;
using nlohmann::json;

namespace {

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("offgrid_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

json noiseless_fit() {
    return json::parse(R"({
        "dictionary": {"family": "gaussian", "scale": 1.0},
        "grid": {"T": 1024},
        "truth": {"amplitudes": [1.0, -0.8], "gap": 9.0},
        "noise": {"model": "none"},
        "kappa": {"rule": "explicit", "value": 0.001}
    })");
}

}  // namespace

TEST_CASE("quantile and log-log slope") {
    CHECK(quantile({3.0, 1.0, 2.0}, 0.5) == 2.0);
    CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.9) == doctest::Approx(3.7));
    CHECK(quantile({5.0}, 0.3) == 5.0);
    CHECK_THROWS_AS(quantile({}, 0.5), DomainError);
    CHECK(loglog_slope({1.0, 2.0, 4.0, 8.0}, {1.0, 0.5, 0.25, 0.125}) == doctest::Approx(-1.0));
    CHECK(loglog_slope({1.0, 10.0}, {3.0, 3.0 * std::sqrt(10.0)}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(loglog_slope({1.0}, {1.0}), DomainError);
}

TEST_CASE("config schema errors") {
    CHECK_THROWS_AS(parse_config(json{{"bogus", 1}}), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"grid": {"T": "many"}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"grid": {"shrinkage": 1.5}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"kappa": {"rule": "magic"}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"noise": {"model": "iid"}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"noise": {"model": "pink", "sigma": 1}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"truth": {"amplitudes": [1.0]}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"truth": {"amplitudes": [0.0], "gap": 3}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"certify": {"eta0": 1.5}})")), ConfigError);
    CHECK_THROWS_AS(parse_config(json::parse(R"({"solver": {"coarse_step": -1}})")), ConfigError);
    const auto c = parse_config(json::parse(R"({"kappa": {"rule": "tuned", "C1": 2.0, "tau": "T"}})"));
    CHECK(c.kappa_rule == ExperimentConfig::KappaRule::tuned);
    CHECK(c.C1 == 2.0);
    CHECK(std::isnan(c.tau));
}

TEST_CASE("config files allow comments") {
    const auto dir = scratch("comments");
    std::ofstream(dir / "c.json") << "{\n  // seed\n  \"seed\": 7\n}\n";
    CHECK(load_config((dir / "c.json").string()).seed == 7);
    std::ofstream(dir / "bad.json") << "{ \"seed\": ";
    CHECK_THROWS_AS(load_config((dir / "bad.json").string()), ConfigError);
    CHECK_THROWS_AS(load_config((dir / "missing.json").string()), ConfigError);
}

TEST_CASE("noiseless fit writes its artefacts") {
    const auto dir = scratch("fit");
    auto cfg = parse_config(noiseless_fit());
    cfg.out_dir = dir.string();
    const auto res = run_fit(cfg);
    CHECK(res.exit_code == 0);
    const auto& est = res.report["estimate"];
    REQUIRE(est["theta"].size() == 2);
    CHECK(est["converged"].get<bool>());
    // beta = beta* - kappa sign(beta*) with exact locations, so the error is kappa sqrt(2)
    // up to the small cross-correlation of the two atoms.
    CHECK(res.report["prediction_error"].get<double>() == doctest::Approx(0.001 * std::sqrt(2.0)).epsilon(0.02));
    for (const char* f : {"estimate.json", "decomposition.json", "summary.csv", "manifest.json"})
        CHECK(std::filesystem::exists(dir / f));
    const auto manifest = json::parse(slurp(dir / "manifest.json"));
    CHECK(manifest["command"] == "fit");
    CHECK(manifest["version"] == version());
    CHECK(slurp(dir / "summary.csv").rfind("seed,T,kappa,support_size,", 0) == 0);
}

TEST_CASE("zero signal fit") {
    auto j = noiseless_fit();
    j.erase("truth");
    const auto res = run_fit(parse_config(j));
    CHECK(res.report["estimate"]["theta"].empty());
    CHECK(res.report["prediction_error"].get<double>() == 0.0);
}

TEST_CASE("same seed gives identical output") {
    auto j = noiseless_fit();
    j["noise"] = {{"model", "iid"}, {"sigma", 0.5}};
    j["kappa"] = {{"rule", "tuned"}};
    j["grid"]["T"] = 512;
    j["truth"]["gap"] = 4.0;
    j["seed"] = 11;
    const auto a = run_fit(parse_config(j));
    const auto b = run_fit(parse_config(j));
    CHECK(a.report["summary_csv"] == b.report["summary_csv"]);
    j["seed"] = 12;
    const auto c = run_fit(parse_config(j));
    CHECK(a.report["summary_csv"] != c.report["summary_csv"]);
}

TEST_CASE("noise_from_json builds each model") {
    const auto m = GridMeasure::regular(0.0, 1.0, 8);
    CHECK(noise_from_json(json{{"model", "none"}}, *m, 0).sigma == 0.0);
    CHECK(noise_from_json(json{{"model", "weighted_iid"}, {"sigma", 1.0}}, *m, 0).delta == m->max_weight());
    CHECK(noise_from_json(json{{"model", "equicorrelated"}, {"sigma", 1.0}, {"correlation", 0.5}}, *m, 0)
              .declared_sigma2() == 2.0);
    CHECK(noise_from_json(json{{"model", "brownian"}, {"scale", 1.0}, {"terms", 10}}, *m, 0).name() ==
          "series_brownian");
    CHECK_THROWS_AS(noise_from_json(json{{"model", "iid"}, {"sigma", 1.0}, {"extra", 1}}, *m, 0), ConfigError);
}

#ifdef OFFGRID_CLI_PATH
TEST_CASE("command-line exit codes") {
    const auto dir = scratch("exit");
    const std::string cli = OFFGRID_CLI_PATH;
    std::ofstream(dir / "bad.json") << R"({"grid": {"T": 1}})";
    std::ofstream(dir / "good.json") << noiseless_fit().dump();
    auto run = [&](const std::string& args) {
        const std::string cmd = "\"" + cli + "\" " + args + " > \"" + (dir / "log.txt").string() + "\" 2>&1";
        const int st = std::system(cmd.c_str());
        return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    };
    CHECK(run("fit --config \"" + (dir / "bad.json").string() + "\"") == 2);
    CHECK(run("fit") == 2);
    CHECK(run("frobnicate --config x") == 2);
    CHECK(run("--version") == 0);
    CHECK(run("fit --config \"" + (dir / "good.json").string() + "\" --out \"" + (dir / "o").string() + "\"") == 0);
    CHECK(std::filesystem::exists(dir / "o" / "estimate.json"));
}
#endif
