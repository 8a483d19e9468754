#pragma once

// Effective Hamiltonian estimates from long-time slopes (or vanishing
// discounts) over environment ensembles, and flat-part endpoints.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vhj/env.hpp"
#include "vhj/ham.hpp"
#include "vhj/pde.hpp"

namespace vhj::homog {

enum class Method { ParabolicSlope, DiscountedLimit };

const char* to_string(Method m);

// Least-squares line through (t, u) for t in [T/2, T], plus the extreme
// slopes between consecutive tail samples.
struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // RMS misfit
    double window_max = 0.0;
    double window_min = 0.0;
    std::size_t points = 0;
};

SlopeFit fit_tail(std::span<const double> times, std::span<const double> values, double horizon);

struct SeedRun {
    std::uint64_t seed = 0;
    double value = 0.0;
    double fit_residual = 0.0;
    long steps = 0;
    double dt = 0.0;
    double alpha = 0.0;
    double max_slope = 0.0;
    int cap_increases = 0;
};

struct EffectiveEstimate {
    double theta = 0.0;
    double value = 0.0;
    double std_error = 0.0;     // sample standard deviation across seeds
    double fit_residual = 0.0;  // worst per-seed residual
    double h_upper = 0.0;       // largest windowed tail slope
    double h_lower = 0.0;       // smallest windowed tail slope
    Method method = Method::ParabolicSlope;
    double horizon = 0.0;
    std::vector<double> discounts;
    std::vector<SeedRun> runs;
};

struct ConvexityReport {
    double min_second_difference = 0.0;
    double tolerance = 0.0;
    bool ok = true;
};

struct EffectiveCurve {
    std::vector<double> theta_grid;
    std::vector<EffectiveEstimate> estimates;
    std::string spec_id;
    double beta = 0.0;
    std::vector<std::uint64_t> seeds;
    std::optional<ConvexityReport> convexity;

    std::vector<double> values() const;
    std::vector<double> std_errors() const;
};

// Half-width every theta in the grid needs, rounded up to the dx lattice.
double ensemble_half_width(const ham::HamiltonianSpec& G, double beta, std::span<const double> theta_grid,
                           const pde::SolverConfig& cfg);

std::vector<env::Environment> sample_ensemble(const env::EnvModel& model, std::span<const std::uint64_t> seeds,
                                              double half_width, double dx, unsigned workers = 1);

EffectiveEstimate estimate_point(std::span<const env::Environment> ensemble, const ham::HamiltonianSpec& G,
                                 double beta, double theta, const pde::SolverConfig& cfg, unsigned workers = 1);

// discount * v(0) along the (decreasing) discounts, extrapolated linearly
// to zero from the two smallest.
EffectiveEstimate estimate_point_discounted(std::span<const env::Environment> ensemble,
                                            const ham::HamiltonianSpec& G, double beta, double theta,
                                            const pde::SolverConfig& cfg, std::span<const double> discounts,
                                            unsigned workers = 1);

ConvexityReport check_convexity(std::span<const double> theta, std::span<const double> values, double tol);

// All (theta, seed) solves run through one worker pool. A convexity report is
// attached when G has a single piece.
EffectiveCurve estimate_curve(std::span<const env::Environment> ensemble, const ham::HamiltonianSpec& G,
                              double beta, std::span<const double> theta_grid, const pde::SolverConfig& cfg,
                              unsigned workers = 1, double convexity_tol = 1e-2);

struct FlatEndpoints {
    double theta_minus = 0.0;
    double theta_plus = 0.0;
    bool minus_at_edge = false;  // clamped to the bracket end
    bool plus_at_edge = false;
};

// theta_+ solves curve_plus = level on [p_hat, c_plus], theta_- solves
// curve_minus = level on [c_minus, p_hat]; both on monotone piecewise-linear
// interpolants of the samples. Levels within `tol` outside the bracket range
// clamp to the nearer end and set the flag.
FlatEndpoints flat_endpoints(const EffectiveCurve& curve_minus, const EffectiveCurve& curve_plus, double level,
                             double p_hat, double c_minus, double c_plus, double tol = 1e-6);

// Piecewise-linear interpolation of a curve at theta (clamped to the grid).
double interpolate(const EffectiveCurve& c, double theta);

}  // namespace vhj::homog
