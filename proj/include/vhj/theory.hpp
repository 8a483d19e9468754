#pragma once

// Closed-form predictions for the flat part of two-well and multi-well
// effective Hamiltonians, corrector gradient bands, and the explicit
// sub/supersolution barriers built on hill and valley witnesses.

#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vhj/env.hpp"
#include "vhj/ham.hpp"
#include "vhj/homog.hpp"
#include "vhj/pde.hpp"

namespace vhj::theory {

enum class Regime { StrongPotential, WeakPotential };

const char* to_string(Regime r);

struct TheoremPrediction {
    std::vector<double> theta_grid;
    std::vector<double> predicted;
    Regime regime = Regime::StrongPotential;
    double theta_minus = 0.0;
    double theta_plus = 0.0;
    double flat_level = 0.0;
    bool minus_at_edge = false;
    bool plus_at_edge = false;
    std::string curve_minus_id;
    std::string curve_plus_id;
};

// Strong regime (beta >= gc_at_phat): beta on [c_minus, c_plus]. Weak regime:
// gc_at_phat on [theta_-, theta_+] from homog::flat_endpoints. The piece
// curves are interpolated outside the flat interval. `grid` defaults to the
// grid of curve_minus; every grid point outside the flat interval must be
// covered by the curve used there.
TheoremPrediction predict_two_well(const homog::EffectiveCurve& curve_minus, const homog::EffectiveCurve& curve_plus,
                                   double c_minus, double c_plus, double p_hat, double beta, double gc_at_phat,
                                   std::span<const double> grid = {}, double tol = 1e-6);

struct MultiwellPrediction {
    std::vector<double> theta_grid;
    std::vector<double> predicted;  // pointwise minimum over consecutive pairs
    std::vector<double> piecewise;  // pair (i-1, i) on (c_{i-1}, c_i]
    double max_disagreement = 0.0;
    bool agree = true;
};

// pairwise[i] is the prediction for pieces (i, i+1); wells are c_0 < ... < c_n.
MultiwellPrediction predict_multiwell(std::span<const TheoremPrediction> pairwise, std::span<const double> wells,
                                      double tol = 1e-9);

struct CommuteReport {
    std::vector<double> theta_grid;
    std::vector<double> envelope;     // conv(min(curve_minus, curve_plus))
    std::vector<double> conv_curve;   // estimate for conv(G_- ^ G_+)
    std::vector<double> three_piece;  // piece curves outside [c_-, c_+], beta inside
    double max_deviation = 0.0;       // |envelope - conv_curve|
    double form_deviation = 0.0;      // |three_piece - conv_curve|
};

// All three curves must share the grid.
CommuteReport check_commute(const homog::EffectiveCurve& curve_minus, const homog::EffectiveCurve& curve_plus,
                            const homog::EffectiveCurve& curve_conv, double beta, double c_minus, double c_plus);

enum class PHatSide { Below, Above };

struct PHatCheck {
    double p_hat = 0.0;
    PHatSide side = PHatSide::Below;
};

struct CorrectorBandReport {
    double theta = 0.0;
    double lambda = 0.0;
    double band_lo = 0.0;  // bounds on theta + F'
    double band_hi = 0.0;
    double slack = 0.0;
    std::size_t nodes = 0;
    std::size_t inside = 0;
    double fraction = 0.0;
    bool degenerate = false;  // beta = 0 collapses the band
    std::optional<double> phat_fraction;
    double worst_excess = 0.0;  // largest distance outside the band
};

// Band for theta + F' from the level roots of g at lambda: [well + a^-,
// well + b^-] when theta > well, [well - b^+, well - a^+] when theta < well.
// Needs lambda > beta (PreconditionError otherwise).
CorrectorBandReport check_corrector_bounds(std::span<const double> grad, const ham::ConvexPiece& g, double theta,
                                           double beta, double lambda_est, double slack,
                                           std::optional<PHatCheck> phat = std::nullopt);

// Same check on a discounted profile, each node against its local level
// discount * v(x) at the smallest discount; nodes whose level is not above
// beta count as outside. The reported band is the one at lambda_est (NaN
// when lambda_est <= beta).
CorrectorBandReport check_discounted_bounds(const pde::CorrectorProfile& p, const ham::ConvexPiece& g, double beta,
                                            double slack, std::optional<PHatCheck> phat = std::nullopt);

// ---------------------------------------------------------------------------

enum class BarrierKind { ChiSubsolution, SSupersolution };

const char* to_string(BarrierKind k);

struct BarrierFunction {
    BarrierKind kind = BarrierKind::ChiSubsolution;
    env::HillValleyWitness witness;
    double theta = 0.0;
    double eps = 0.0;
    double h = 0.0;
    double y = 0.0;
    double c = 0.0;
    double delta = 0.0;
    double x0 = 0.0;
    double k = 0.0;
    double rate = 0.0;   // time derivative
    double alpha = 0.0;  // dissipation the residual was checked with
    std::vector<double> x;
    std::vector<double> value0;  // value at t = 0 on every env node
    std::vector<double> d1;      // closed-form first derivative
    std::vector<double> d2;      // closed-form second derivative (one-sided at kinks)

    // Discrete residual a D2 + G_hat + beta V - rate on interior nodes; for a
    // subsolution the worst value below zero, for a supersolution above zero.
    double max_violation = 0.0;
    double slack = 0.0;
    bool residual_ok = false;
    bool initial_ok = false;  // ordered against theta x at t = 0

    double value(std::size_t i, double t) const { return value0[i] + rate * t; }
};

// v(t, x) = theta x - eps int_{x0}^x chi + (beta h - eps) t with chi the
// scaled coordinate from x0; h and y come from the (hill) witness.
BarrierFunction build_chi_subsolution(const env::Environment& env, const env::HillValleyWitness& witness,
                                      double theta, const ham::HamiltonianSpec& G, double beta, double eps);

// w(t, x) = k + int_{x0}^x s + (eta + 3c/(2y) + beta h) t with the C1 cubic
// profile s in the scaled coordinate; h and y come from the (valley) witness.
BarrierFunction build_s_supersolution(const env::Environment& env, const env::HillValleyWitness& witness,
                                      double theta, double c, const ham::HamiltonianSpec& G, double beta);

struct ComparisonReport {
    long steps = 0;
    double dt = 0.0;
    double alpha = 0.0;
    std::size_t checked = 0;  // (node, step) pairs outside the boundary cone
    std::size_t lower_violations = 0;
    std::size_t upper_violations = 0;
    double worst_lower = std::numeric_limits<double>::infinity();  // smallest u - v
    double worst_upper = std::numeric_limits<double>::infinity();  // smallest w - u
};

// Evolves u from theta x with the monotone scheme and checks
// v - viol t <= u <= w + viol t on nodes the boundary cannot yet reach.
ComparisonReport check_barrier_comparison(const env::Environment& env, const ham::HamiltonianSpec& G, double beta,
                                          double theta, const BarrierFunction* lower, const BarrierFunction* upper,
                                          long steps, double cfl_safety = 0.9);

}  // namespace vhj::theory
