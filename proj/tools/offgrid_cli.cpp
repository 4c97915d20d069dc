#include "offgrid/cli.hpp"
#include "offgrid/errors.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>

int main(int argc, char** argv) {
    CLI::App app{"Off-the-grid sparse mixture estimation: fits, rate studies and certificate checks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", offgrid::version());

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    int jobs = 0;

    using Runner = std::function<offgrid::RunResult(const offgrid::ExperimentConfig&)>;
    const std::vector<std::tuple<std::string, std::string, Runner>> commands = {
        {"fit", "Generate data from the configured scenario and fit it", offgrid::run_fit},
        {"rates", "Monte Carlo prediction-error rates over a ladder of T", offgrid::run_rates},
        {"certify", "Constants table and certificate verification on a support", offgrid::run_certify},
        {"separation", "Separation distance estimates", offgrid::run_separation},
        {"noise-check", "Variance bound and sup-tail checks for the noise model", offgrid::run_noise_check},
    };
    std::vector<CLI::App*> subs;
    for (const auto& [name, help, run] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override the configured seed");
        sub->add_option("--out", out_dir, "Output directory (overrides the config)");
        sub->add_option("--jobs", jobs, "Worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        offgrid::ExperimentConfig cfg = offgrid::load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (jobs > 0) cfg.jobs = jobs;
        for (std::size_t k = 0; k < subs.size(); ++k) {
            if (!subs[k]->parsed()) continue;
            const offgrid::RunResult res = std::get<2>(commands[k])(cfg);
            std::cout << res.text;
            return res.exit_code;
        }
    } catch (const offgrid::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const offgrid::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
