// Command-line entry points for the canned experiments.
//
//   bbm-lab run  --config PATH [--set key=value ...] [--workers N]
//                [--seed S] [--out DIR]
//   bbm-lab list
//
// `run` executes the experiment named in the config, writes results.csv,
// summary.json, report.json, the frozen config, and metadata.json into the
// output directory, and exits 0 only if every gate passes (2 on config
// errors, 1 on runtime failures, 3 on gate failures).

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bbm/runner.hpp"

namespace {

std::vector<std::pair<std::string, std::string>> parse_overrides(
    const std::vector<std::string>& sets) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const std::string& s : sets) {
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw bbm::ConfigError("--set expects key=value, got '" + s + "'");
        out.push_back({bbm::detail::trim(s.substr(0, eq)), bbm::detail::trim(s.substr(eq + 1))});
    }
    return out;
}

int cmd_list() {
    std::printf("%-18s %-72s %s\n", "id", "description", "statement");
    for (const bbm::ExperimentDef& def : bbm::experiment_registry())
        std::printf("%-18s %-72s %s\n", def.id.c_str(), def.description.c_str(),
                    def.anchor.c_str());
    return 0;
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets, int workers,
            long long seed, bool seed_given, const std::string& out_dir) {
    bbm::KeyValueConfig cfg;
    try {
        cfg = bbm::KeyValueConfig::parse_file(config_path);
    } catch (const bbm::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return bbm::kExitConfig;
    }

    std::vector<std::pair<std::string, std::string>> overrides;
    try {
        overrides = parse_overrides(sets);
    } catch (const bbm::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return bbm::kExitConfig;
    }

    const int env_workers = bbm::default_workers_from_env();
    const int effective_workers = workers > 0 ? workers : env_workers;

    std::optional<std::uint64_t> seed_override;
    if (seed_given) seed_override = static_cast<std::uint64_t>(seed);

    const bbm::RunOutput run =
        bbm::execute_experiment(cfg, overrides, effective_workers, seed_override);
    if (run.exit_code == bbm::kExitConfig || run.exit_code == bbm::kExitRuntime) {
        std::fprintf(stderr, "error: %s\n", run.message.c_str());
        return run.exit_code;
    }

    std::string dir = out_dir;
    if (dir.empty()) dir = "results-" + run.experiment_id;
    if (!bbm::write_run_outputs(dir, run, effective_workers)) {
        std::fprintf(stderr, "error: cannot write outputs to '%s'\n", dir.c_str());
        return bbm::kExitRuntime;
    }

    for (const bbm::GateRow& g : run.result.gates)
        std::printf("[%s] %-44s %-24s value=%.6g threshold%s%.6g\n", g.pass ? "pass" : "FAIL",
                    g.id.c_str(), g.anchor.c_str(), g.value, g.cmp.c_str(), g.threshold);
    std::printf("%s: %s (outputs in %s)\n", run.experiment_id.c_str(),
                run.exit_code == bbm::kExitOk ? "all gates pass" : "gate failure", dir.c_str());
    return run.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectral simulator and statistical verification suite for stochastic BBM"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    std::string config_path;
    std::vector<std::string> sets;
    int workers = 0;
    long long seed = 0;
    std::string out_dir;
    run->add_option("--config", config_path, "experiment config file")->required();
    run->add_option("--set", sets, "override a config key (key=value, repeatable)");
    run->add_option("--workers", workers, "worker threads (0 = BBM_WORKERS env or hardware)");
    auto* seed_opt = run->add_option("--seed", seed, "override the master seed");
    run->add_option("--out", out_dir, "output directory");

    auto* list = app.add_subcommand("list", "list available experiments");

    CLI11_PARSE(app, argc, argv);

    if (list->parsed()) return cmd_list();
    return cmd_run(config_path, sets, workers, seed, seed_opt->count() > 0, out_dir);
}
