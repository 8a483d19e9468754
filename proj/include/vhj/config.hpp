#pragma once

// Experiment configuration: a versioned JSON document. See README.md for
// the full key reference.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vhj/env.hpp"
#include "vhj/ham.hpp"
#include "vhj/homog.hpp"
#include "vhj/pde.hpp"

namespace vhj::config {

inline constexpr int kConfigVersion = 1;

enum class Kind { Curve, VerifyT11, VerifyT12, Commute, CorrectorBands, Barriers, WitnessSearch };

const char* to_string(Kind k);

struct Tolerances {
    double exact = 1e-3;         // affine/constant-potential identity
    double prediction = 5e-2;    // estimate against theorem prediction
    double plateau = 5e-2;       // flat-part level
    double commute = 5e-2;       // commute deviation
    double convexity = 1e-2;     // second differences of single-piece curves
    double flat_root = 1e-2;     // clamp tolerance when locating theta_+-
    double band_fraction = 0.99;
    double band_slack = 1e-2;
    double band_margin = 0.1;    // bands checked where lambda >= beta + margin
    double multiwell_forms = 5e-2;
};

struct CorrectorOptions {
    std::size_t piece = 0;
    std::vector<double> discounts{0.1, 0.05, 0.025};
    std::optional<double> p_hat;
    bool phat_below = true;
    // The extrapolated-level diagnostic uses |x| <= window, where v - v(0) approximates the corrector.
    double window = 25.0;
};

struct BarrierOptions {
    double theta = 0.0;
    double eps = 0.5;
    double hill_h = 0.9;
    double valley_h = 0.1;
    double y = 4.0;
    double c = 1.0;
    long steps = 400;
    double half_width = 30.0;
};

struct WitnessOptions {
    double h = 0.9;
    double y = 4.0;
    env::WitnessKind kind = env::WitnessKind::Hill;
    double delta_min = 1e-3;
    double half_width = 100.0;
};

struct ExperimentConfig {
    int version = kConfigVersion;
    std::string name;
    Kind kind = Kind::Curve;
    env::EnvModel environment;
    ham::HamiltonianSpec hamiltonian;
    double beta = 0.0;
    std::vector<double> theta_grid;
    pde::SolverConfig solver;
    std::vector<std::uint64_t> seeds;
    homog::Method method = homog::Method::ParabolicSlope;
    std::string output_dir = "out";
    Tolerances tolerances;
    // Strong-regime plateau check interval; defaults to [c_-, c_+].
    std::optional<std::pair<double, double>> plateau_interval;
    CorrectorOptions corrector;
    BarrierOptions barriers;
    WitnessOptions witness;
    // Canonical form of the input document (hashed into every output).
    nlohmann::json canonical;
};

// Throws ConfigError; JSON syntax errors carry line and column, missing or
// unknown keys carry their dotted path.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

env::EnvModel parse_environment(const nlohmann::json& j, const std::string& path = "environment");
ham::HamiltonianSpec parse_hamiltonian(const nlohmann::json& j, const std::string& path = "hamiltonian");
pde::SolverConfig parse_solver(const nlohmann::json& j, const std::string& path = "solver");

// 64-bit FNV-1a of the canonical document, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// Shift every seed by `offset`.
void apply_seed_offset(ExperimentConfig& cfg, std::uint64_t offset);

}  // namespace vhj::config
