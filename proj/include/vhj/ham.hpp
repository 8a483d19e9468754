#pragma once

// Nonconvex Hamiltonians G = G_0 ^ ... ^ G_n built from convex pieces with
// ordered wells, their crossing points, level roots and convex envelopes.

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace vhj::ham {

// p -> scale * |p - well|^gamma
struct PowerWell {
    double gamma = 2.0;
    double scale = 1.0;
};

struct AsymmetricPowerWell {
    double gamma = 2.0;
    double scale_left = 1.0;
    double scale_right = 1.0;
};

// Convex piecewise-linear interpolation of (knots, values), knots in absolute
// p coordinates. Outside the table the last slope continues and
// ext_scale * d^gamma is added, d being the distance to the end knot.
struct TabulatedConvex {
    std::vector<double> knots;
    std::vector<double> values;
    double gamma = 2.0;
    double ext_scale = 1.0;
};

using Shape = std::variant<PowerWell, AsymmetricPowerWell, TabulatedConvex>;

struct ConvexPiece {
    double well = 0.0;
    Shape shape = PowerWell{};
};

double eval(const ConvexPiece& g, double p);
// A one-sided derivative (the right one, except 0 at the well).
double deriv(const ConvexPiece& g, double p);

// Throws ParameterError unless the piece is well formed: positive scales,
// gamma >= 1, convex table with zero minimum at the well.
void validate(const ConvexPiece& g);

ConvexPiece shifted(const ConvexPiece& g, double k);  // p -> g(p + k)
ConvexPiece reflected(const ConvexPiece& g);          // p -> g(-p)

struct HamiltonianSpec {
    std::vector<ConvexPiece> pieces;
    std::vector<double> crossings;  // crossings[i] between pieces i and i+1
    double alpha0 = 0.1;
    double alpha1 = 10.0;
    double gamma = 2.0;
    std::string id;

    std::size_t wells() const noexcept { return pieces.size(); }
};

// Validates pieces, checks the wells increase strictly and computes every
// crossing (StructureError when a pair does not cross exactly once).
HamiltonianSpec make_spec(std::vector<ConvexPiece> pieces, double alpha0, double alpha1, double gamma,
                          std::string id = {});

// Two pieces (p - 1)^2 / 2 style: wells at c_minus < c_plus, equal shapes.
HamiltonianSpec power_two_well(double c_minus, double c_plus, double gamma = 2.0, double scale = 0.5);
// Equal power pieces scale * |p - c_i|^gamma at increasing wells.
HamiltonianSpec power_multi_well(const std::vector<double>& wells, double gamma = 2.0, double scale = 0.5);

double eval(const HamiltonianSpec& spec, double p);
// Index of the piece attaining the minimum (lowest index on ties).
std::size_t active_piece(const HamiltonianSpec& spec, double p);
double deriv(const HamiltonianSpec& spec, double p);

// Lipschitz constant of G on [lo, hi]: the active derivative sampled on a
// grid, plus both one-sided derivatives at crossings inside the range.
double max_abs_derivative(const HamiltonianSpec& spec, double lo, double hi, std::size_t samples = 2001);

HamiltonianSpec shifted(const HamiltonianSpec& spec, double k);
HamiltonianSpec single(const HamiltonianSpec& spec, std::size_t i);
HamiltonianSpec pair(const HamiltonianSpec& spec, std::size_t i);  // pieces i, i+1

// Unique p in (gi.well, gj.well) with gi(p) = gj(p).
double crossing_point(const ConvexPiece& gi, const ConvexPiece& gj, double tol = 1e-12);

struct LevelRoots {
    std::optional<double> a_minus;
    std::optional<double> b_minus;
    std::optional<double> a_plus;
    std::optional<double> b_plus;
};

// Roots measured from the well: g(well + a^-) = lambda - beta,
// g(well + b^-) = lambda, g(well - a^+) = lambda - beta, g(well - b^+) = lambda.
LevelRoots level_roots(const ConvexPiece& g, double lambda, double beta);

// Greatest convex minorant of the samples (x strictly increasing),
// evaluated back on x.
std::vector<double> convex_envelope(std::span<const double> x, std::span<const double> f);

// conv(G_- ^ G_+) for a two-well spec: G_- left of c_-, 0 between the
// wells, G_+ right of c_+.
double two_well_convexification(const HamiltonianSpec& spec, double p);

// Tabulated piece sampling conv(G_- ^ G_+) on [lo, hi] with n knots.
ConvexPiece tabulate_two_well_convexification(const HamiltonianSpec& spec, double lo, double hi, std::size_t n);

struct GrowthReport {
    double lower_margin = 0.0;    // min of G - (alpha0 |p|^gamma - 1/alpha0)
    double upper_margin = 0.0;    // min of alpha1 (|p|^gamma + 1) - G
    double modulus_margin = 0.0;  // min of alpha1 (|p|+|q|+1)^(gamma-1) |p-q| - |G(p)-G(q)|
    double worst_lower_p = 0.0;
    bool growth_ok = false;
    bool modulus_ok = false;
    bool ok = false;
};

GrowthReport check_growth_and_modulus(const HamiltonianSpec& spec, double p_max, std::size_t samples = 401);

std::string describe(const ConvexPiece& g);
std::string describe(const HamiltonianSpec& spec);

}  // namespace vhj::ham
