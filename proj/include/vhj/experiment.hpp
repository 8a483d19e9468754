#pragma once

// Runs a configured experiment end to end and writes its artifacts.

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vhj/config.hpp"
#include "vhj/report.hpp"

namespace vhj::experiment {

struct Check {
    std::string name;
    bool pass = false;
    double value = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct Plot {
    std::string name;
    std::string title;
    std::string table;  // table holding the x column and the series
    std::string x;
    std::vector<std::string> y;
    std::vector<std::string> dashed;
};

struct Result {
    std::string name;
    config::Kind kind = config::Kind::Curve;
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
    std::vector<Check> checks;
    std::vector<report::Table> tables;
    std::vector<Plot> plots;
    nlohmann::json details = nlohmann::json::object();
    std::vector<nlohmann::json> log;

    bool passed() const;
    nlohmann::json to_json() const;
};

// Progress messages for humans (stderr in the CLI); not part of any artifact.
using Progress = std::function<void(const std::string&)>;

Result run(const config::ExperimentConfig& cfg, unsigned workers = 1, const Progress& progress = {});

// Dry run: resolved specs, grid sizes, step estimates and planned checks.
std::string describe(const config::ExperimentConfig& cfg);

// curves/<name>[_table].csv, reports/<name>.json, logs/<name>.jsonl,
// plots/<name>[_plot].svg under out_dir.
void write_outputs(const Result& r, const std::string& out_dir);

// Failure payload for reports/<name>_error.json.
void write_error(const std::string& name, const std::string& config_hash, const std::string& kind,
                 const std::string& message, const std::string& out_dir);

}  // namespace vhj::experiment
