// SPDX-License-Identifier: Apache-2.0
// Scenario runner: riskit --scenario fig2 --seed 1 --trials 100 --out results
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "riskit/cli.hpp"
#include "riskit/errors.hpp"
#include "riskit/parallel.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"RIS link-level simulator: runs a built-in scenario and writes CSV tables plus manifest.json.\n"
                 "RISKIT_THREADS caps the number of worker threads."};
    std::string scenario, config_path, out_dir;
    std::uint64_t seed = 0;
    int trials = 0;
    std::vector<std::string> sets;
    bool list = false, show_defaults = false;
    app.add_option("--scenario", scenario, "fig2 .. fig7 or custom");
    app.add_option("--config", config_path, "JSON config file; flags given on the command line win");
    auto* seed_opt = app.add_option("--seed", seed, "64-bit base seed");
    app.add_option("--trials", trials, "Monte-Carlo trials (seeds for fig4/fig5); default per scenario")
        ->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--set", sets, "KEY=VALUE parameter override, VALUE parsed as JSON")->take_all();
    app.add_flag("--list", list, "list scenarios and exit");
    app.add_flag("--defaults", show_defaults, "print the scenario's default parameters and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    if (list) {
        for (const auto& s : riskit::cli::scenario_names())
            std::printf("%s\n", s.c_str());
        return 0;
    }

    try {
        riskit::cli::ExperimentConfig cfg;
        if (!config_path.empty())
            cfg = riskit::cli::parse_config_file(config_path);
        if (!scenario.empty())
            cfg.scenario = scenario;
        if (*seed_opt)
            cfg.seed = seed;
        if (trials > 0)
            cfg.trials = trials;
        if (!out_dir.empty())
            cfg.out_path = out_dir;
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw riskit::ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
            riskit::cli::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (cfg.scenario.empty())
            throw riskit::ConfigError("no scenario given (use --scenario or a config file)");
        if (show_defaults) {
            std::printf("%s\n", riskit::cli::scenario_defaults(cfg.scenario).dump(2).c_str());
            return 0;
        }

        const auto resolved = riskit::cli::resolve(cfg);
        std::fprintf(stderr, "riskit: %s seed=%llu trials=%d workers=%u\n", resolved.scenario.c_str(),
                     static_cast<unsigned long long>(resolved.seed), resolved.trials, riskit::worker_count());
        auto out = riskit::cli::run_scenario(resolved);
        for (const auto& f : riskit::cli::write_outputs(cfg, resolved, out))
            std::printf("%s\n", f.c_str());
        return 0;
    } catch (const riskit::NumericError& e) {
        std::fprintf(stderr, "riskit: numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const riskit::SingularError& e) {
        std::fprintf(stderr, "riskit: numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const riskit::Error& e) {
        // ConfigError, and domain or shape errors raised by bad parameter values
        std::fprintf(stderr, "riskit: config error: %s\n", e.what());
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "riskit: config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "riskit: error: %s\n", e.what());
        return 1;
    }
}
