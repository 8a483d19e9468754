#pragma once

// Monotone finite differences for u_t = a u'' + G(u') + beta V with linear
// data theta x, and for the discounted stationary problem
// discount v = a v'' + G(theta + v') + beta V.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "vhj/env.hpp"
#include "vhj/ham.hpp"

namespace vhj::pde {

struct SolverConfig {
    double dx = 0.02;
    double cfl_safety = 0.9;
    double horizon = 50.0;
    double domain_margin = 5.0;
    // Lax-Friedrichs dissipation; 0 selects 1.1 * Lip(G) on [-cap, cap].
    double lf_dissipation = 0.0;
    // A priori slope bound kappa(theta); 0 selects slope_cap().
    double lipschitz_cap = 0.0;
    // Time step; 0 selects cfl_safety times the largest monotone step.
    double dt = 0.0;
    // Times at which u(t, 0) is recorded; empty selects default_output_times().
    std::vector<double> output_times;
    std::size_t tail_points = 16;
    // Only advance nodes that can still influence x = 0 by time T.
    bool light_cone = true;

    double solve_tol = 1e-9;
    std::size_t max_iterations = 500;
    // Discounted half-width = domain_margin + width_factor * (alpha + sqrt(a_max)) / discount.
    double width_factor = 8.0;
};

// Union of T 2^-k (k = 0..6) and tail_points uniform times on [T/2, T].
std::vector<double> default_output_times(double horizon, std::size_t tail_points);

// max |p| over {G(p) <= G(theta) + beta}, scaled by 1.25 and padded by 0.25.
double slope_cap(const ham::HamiltonianSpec& G, double beta, double theta);

// Resolved numerical parameters for one (theta, environment) solve.
struct StepParams {
    double cap = 0.0;
    double alpha = 0.0;
    double dt = 0.0;      // time step actually used
    double dt_max = 0.0;  // monotonicity limit
    double speed = 0.0;   // bound for characteristic speeds (= alpha)
    double half_width = 0.0;
};

StepParams resolve(const env::Environment& env, const ham::HamiltonianSpec& G, double beta, double theta,
                   const SolverConfig& cfg);

// Half-width of the domain solve_linear_data needs: alpha T + margin plus
// eight diffusion lengths sqrt(a_max T).
double required_half_width(const ham::HamiltonianSpec& G, double beta, double theta, const SolverConfig& cfg,
                           double a_max = 1.0);

struct ParabolicState {
    double t = 0.0;
    double theta = 0.0;
    std::size_t first = 0;  // env index of u[0]
    std::vector<double> u;
    long steps = 0;
    double max_slope = 0.0;
    double min_w = 0.0;  // extremes of u - theta x
    double max_w = 0.0;
};

// u = theta x on env nodes [first, last].
ParabolicState initial_state(const env::Environment& env, double theta, std::size_t first, std::size_t last);

// One explicit Euler step. Ghost values extend u with slope theta.
// Throws ConfigError("CFL ...") when cfg.dt exceeds the monotone limit and
// NumericError on non-finite values.
ParabolicState step(const ParabolicState& state, const env::Environment& env, const ham::HamiltonianSpec& G,
                    double beta, const SolverConfig& cfg);

// Same with explicitly resolved parameters (used by the step loop and
// property tests that want a fixed dt).
void step_inplace(ParabolicState& state, const env::Environment& env, const ham::HamiltonianSpec& G, double beta,
                  double alpha, double dt);

struct ParabolicDiagnostics {
    long steps = 0;
    double dt = 0.0;
    double alpha = 0.0;
    double cap = 0.0;
    double half_width = 0.0;
    double max_slope = 0.0;  // largest |average slope| met by the flux
    int cap_increases = 0;
};

struct ParabolicResult {
    std::vector<double> times;
    std::vector<double> u_origin;
    ParabolicState final_state;  // exact only where the light cone kept nodes active
    ParabolicDiagnostics diag;
};

ParabolicResult solve_linear_data(const env::Environment& env, const ham::HamiltonianSpec& G, double beta,
                                  double theta, const SolverConfig& cfg);

// ---------------------------------------------------------------------------

struct DiscountedState {
    double discount = 1.0;
    double theta = 0.0;
    std::size_t first = 0;  // env index of v[0]
    double x_first = 0.0;
    double dx = 0.0;
    std::vector<double> v;
    double residual = 0.0;
    std::size_t iterations = 0;
    std::vector<double> residual_history;
    double alpha = 0.0;
    // constant sub/supersolution sandwich G(theta) + beta min V <= discount v <= G(theta) + beta max V
    double lower_bound = 0.0;
    double upper_bound = 0.0;
    bool sup_bound_ok = false;

    double value_at_origin() const;
};

double discounted_half_width(const ham::HamiltonianSpec& G, double beta, double theta, double discount,
                             const SolverConfig& cfg, double a_max = 1.0);

// Pseudo-time marching with linearly implicit steps; the step grows as the
// residual falls, which turns the iteration into Newton's method. `warm`
// (on the same nodes) seeds the iteration.
DiscountedState solve_discounted(const env::Environment& env, const ham::HamiltonianSpec& G, double beta,
                                 double theta, double discount, const SolverConfig& cfg,
                                 const std::vector<double>* warm = nullptr, double half_width = 0.0);

struct CorrectorProfile {
    double theta = 0.0;
    std::vector<double> x;     // inner half of the domain
    std::vector<double> F;     // v - v(0) at the smallest discount
    std::vector<double> grad;  // centred differences of F
    std::vector<double> discounts;
    std::vector<double> discounted_values;  // discount * v(0) per discount
    std::vector<double> residuals;
    double lambda_est = 0.0;                // discount * v(0) at the smallest discount
    double lambda_limit = 0.0;              // linear extrapolation to zero discount from the two smallest
    double half_width = 0.0;
};

CorrectorProfile corrector_profile(const env::Environment& env, const ham::HamiltonianSpec& G, double beta,
                                   double theta, const SolverConfig& cfg, std::span<const double> discounts);

}  // namespace vhj::pde
