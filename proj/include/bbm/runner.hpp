#pragma once

// Binds a parsed config to an experiment: validates against the schema,
// executes, and writes the output set (results.csv, summary.json,
// report.json, the frozen config, and a metadata file that holds everything
// volatile such as timestamps and wall-clock timings).

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bbm/experiments.hpp"

namespace bbm {

// Distinct exit codes: 0 all gates pass, 1 runtime failure, 2 config/schema
// violation, 3 gate failure.
enum ExitCode : int {
    kExitOk = 0,
    kExitRuntime = 1,
    kExitConfig = 2,
    kExitGate = 3,
};

struct RunOutput {
    int exit_code = kExitOk;
    std::string message;
    ExperimentResult result;
    std::string frozen_config;
    std::string experiment_id;
    double wall_seconds = 0.0;
};

inline RunOutput execute_experiment(KeyValueConfig cfg,
                                    const std::vector<std::pair<std::string, std::string>>& overrides,
                                    int workers,
                                    std::optional<std::uint64_t> seed_override = std::nullopt) {
    RunOutput out;
    try {
        for (const auto& [k, v] : overrides) cfg.set(k, v);
        if (seed_override) cfg.set("seed.master", std::to_string(*seed_override));
        if (!cfg.has("experiment.id")) throw ConfigError("config: missing experiment.id");
        const std::string id = cfg.values().at("experiment.id");
        const ExperimentDef* def = find_experiment(id);
        if (!def) throw ConfigError("config: unknown experiment id '" + id + "'");
        const MaterializedConfig mat(def->schema.materialize(cfg));
        out.frozen_config = mat.serialize();
        out.experiment_id = id;
        const auto t0 = std::chrono::steady_clock::now();
        out.result = def->run(mat, workers);
        out.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        out.exit_code = out.result.all_pass() ? kExitOk : kExitGate;
        if (out.exit_code == kExitGate) {
            out.message = "gate failure:";
            for (const GateRow& g : out.result.gates)
                if (!g.pass) out.message += " " + g.id;
        }
    } catch (const ConfigError& e) {
        out.exit_code = kExitConfig;
        out.message = e.what();
    } catch (const std::exception& e) {
        out.exit_code = kExitRuntime;
        out.message = e.what();
    }
    return out;
}

inline json gates_to_json(const std::vector<GateRow>& gates) {
    json arr = json::array();
    for (const GateRow& g : gates) {
        arr.push_back(json{{"id", g.id},
                           {"anchor", g.anchor},
                           {"detail", g.detail},
                           {"value", g.value},
                           {"cmp", g.cmp},
                           {"threshold", g.threshold},
                           {"pass", g.pass}});
    }
    return arr;
}

// Writes the deterministic outputs plus metadata.json. Returns false on I/O
// failure.
inline bool write_run_outputs(const std::filesystem::path& dir, const RunOutput& run,
                              int workers) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) return false;

    {
        std::ofstream os(dir / "results.csv", std::ios::binary);
        if (!os) return false;
        for (std::size_t i = 0; i < run.result.csv_header.size(); ++i)
            os << (i ? "," : "") << run.result.csv_header[i];
        os << "\n";
        for (const auto& row : run.result.csv_rows) {
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
            os << "\n";
        }
    }
    {
        std::ofstream os(dir / "summary.json", std::ios::binary);
        if (!os) return false;
        os << run.result.summary.dump(2) << "\n";
    }
    {
        json report{{"experiment", run.experiment_id},
                    {"gates", gates_to_json(run.result.gates)},
                    {"all_pass", run.result.all_pass()}};
        std::ofstream os(dir / "report.json", std::ios::binary);
        if (!os) return false;
        os << report.dump(2) << "\n";
    }
    {
        std::ofstream os(dir / "config.frozen.ini", std::ios::binary);
        if (!os) return false;
        os << run.frozen_config;
    }
    {
        const std::time_t now = std::time(nullptr);
        char stamp[64];
        std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        json meta{{"timestamp_utc", stamp},
                  {"wall_seconds", run.wall_seconds},
                  {"workers", workers},
                  {"phase_seconds", run.result.timers}};
        std::ofstream os(dir / "metadata.json", std::ios::binary);
        if (!os) return false;
        os << meta.dump(2) << "\n";
    }
    return true;
}

inline int default_workers_from_env() {
    const char* env = std::getenv("BBM_WORKERS");
    if (!env) return 0;
    try {
        return std::max(0, std::stoi(env));
    } catch (...) {
        return 0;
    }
}

}  // namespace bbm
