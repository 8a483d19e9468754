#pragma once

// Stationary random environments (diffusion coefficient a and potential V)
// sampled on uniform grids, plus hill/valley witness search.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace vhj::env {

// ---------------------------------------------------------------------------
// Gap laws for renewal point processes. Every law has a strictly positive
// minimal gap, so piecewise-linear interpolation of [0,1] marks is
// (1/gap_min)-Lipschitz.

struct PointMassGap {
    double gap = 1.0;
};

struct UniformGap {
    double lo = 1.0;
    double hi = 2.0;
};

// gap = min + Exp(mean_excess)
struct ShiftedExpGap {
    double min = 1.0;
    double mean_excess = 1.0;
};

using GapLaw = std::variant<PointMassGap, UniformGap, ShiftedExpGap>;

double gap_min(const GapLaw& law);
double gap_mean(const GapLaw& law);
void validate(const GapLaw& law);

// ---------------------------------------------------------------------------
// Potential models.

struct ConstantV {
    double level = 0.0;
};

enum class PeriodicProfile { Sine, Triangle };

// Sine: (1 + sin(2*pi*(x - phase)/period)) / 2. Triangle: 0 at phase, 1 at
// phase + period/2, linear in between.
struct PeriodicV {
    PeriodicProfile profile = PeriodicProfile::Sine;
    double period = 1.0;
    double phase = 0.0;
};

// Stationary renewal points S_k with i.i.d. Bernoulli(p) marks, linearly
// interpolated between neighbouring points.
struct RenewalBernoulli {
    GapLaw gaps = PointMassGap{};
    double p = 0.5;
};

// Discrete Brownian path (increments at the grid resolution, started from a
// uniform value) folded into [0,1]; smoothed by a tent kernel of the given
// width when mollifier_width > 0.
struct ReflectedBM {
    double mollifier_width = 0.0;
    double sigma = 1.0;
};

// V = (1 + sum_k zeta_k phi_k(x)) / 2 with zeta_k = +-1 and tent bumps
// phi(z) = max(0, 1 - L|z|) rescaled by the neighbouring gaps. With the
// point-mass gap law no interval longer than a single bump is an h-hill.
struct RigidBump {
    double bump_lipschitz = 2.0;
    GapLaw gaps = PointMassGap{};
    double p = 0.5;
};

struct VModel;

// Tent-kernel average of an inner potential over a window of `width`.
struct MollifiedWrap {
    std::shared_ptr<const VModel> inner;
    double width = 1.0;
};

struct VModel : std::variant<ConstantV, PeriodicV, RenewalBernoulli, ReflectedBM, RigidBump, MollifiedWrap> {
    using variant::variant;
};

// ---------------------------------------------------------------------------
// Diffusion models. Each describes sqrt(a) so the Lipschitz constant applies
// directly to it.

struct ConstantA {
    double level = 0.5;
};

// sqrt(a(x)) = min(sqrt(level), sqrt_slope * dist(x, offset + period*Z)):
// a vanishes on a periodic zero set.
struct DegenerateA {
    double level = 0.5;
    double period = 4.0;
    double offset = 0.0;
    double sqrt_slope = 1.0;
};

// sqrt(a) = sqrt(lo) + (sqrt(hi) - sqrt(lo)) * W(x) for an independent
// potential-type field W with values in [0,1].
struct SampledA {
    std::shared_ptr<const VModel> inner;
    double lo = 0.25;
    double hi = 1.0;
};

struct AModel : std::variant<ConstantA, DegenerateA, SampledA> {
    using variant::variant;
};

struct EnvModel {
    VModel v = ConstantV{};
    AModel a = ConstantA{};
};

std::string describe(const VModel& m);
std::string describe(const AModel& m);
std::string describe(const EnvModel& m);

// ---------------------------------------------------------------------------

struct Environment {
    double grid_min = 0.0;
    double grid_max = 0.0;
    double dx = 1.0;
    std::vector<double> a_values;
    std::vector<double> v_values;
    EnvModel model;
    std::uint64_t seed = 0;
    // Declared Lipschitz constant of sqrt(a) and V (infinite when the model
    // is not Lipschitz, e.g. an unmollified Brownian path).
    double kappa = 0.0;

    std::size_t size() const noexcept { return v_values.size(); }
    double x(std::size_t i) const noexcept {
        return on_lattice_ ? static_cast<double>(lattice_offset_ + static_cast<std::int64_t>(i)) * dx
                           : x0_ + static_cast<double>(i) * dx;
    }
    // Nearest node index to x (clamped to the grid).
    std::size_t nearest(double xq) const noexcept;
    // Index of the node at exactly x = 0, if the grid has one.
    std::optional<std::size_t> origin_index() const noexcept;
    // Copy of the sub-environment on nodes [first, last].
    Environment slice(std::size_t first, std::size_t last) const;

    double x0_ = 0.0;  // coordinate of node 0 (grid_min snapped to the lattice)
    std::int64_t lattice_offset_ = 0;
    bool on_lattice_ = false;
};

Environment sample_environment(const EnvModel& model, double grid_min, double grid_max, double dx,
                               std::uint64_t seed);

struct LipschitzReport {
    double max_sqrt_a_slope = 0.0;
    double max_v_slope = 0.0;
    bool values_in_unit_interval = true;
    bool ok = true;
};

// Checks the Environment invariants: sample ranges and discrete slopes of
// sqrt(a) and V against kappa*(1+tol).
LipschitzReport check_lipschitz(const Environment& env, double tol = 1e-6);

// ---------------------------------------------------------------------------
// Scaled length: integral of 1/(a v delta) with the integrand interpolated
// linearly between nodes.

double scaled_length(const Environment& env, double l1, double l2, double delta);

// Cumulative scaled length from grid_min to every node.
std::vector<double> cumulative_scaled_length(const Environment& env, double delta);

// Point x in [from, grid_max] with scaled_length(from, x) == target.
double invert_scaled_length(const Environment& env, double from, double target, double delta);

enum class WitnessKind { Hill, Valley };

struct HillValleyWitness {
    double l1 = 0.0;
    double l2 = 0.0;
    double delta = 0.5;
    double h = 0.5;
    double y = 1.0;
    WitnessKind kind = WitnessKind::Hill;
};

struct WitnessSearchOptions {
    double delta_min = 1e-3;
};

// Leftmost node-aligned maximal h-hill (h-valley) interval whose scaled
// length reaches 2y. When the interval is shorter than 2y in Euclidean
// length, delta is found by bisection so the scaled length of the whole
// interval is 2y; otherwise delta = delta_min and l2 is moved in.
std::optional<HillValleyWitness> find_witness(const Environment& env, double h, double y, WitnessKind kind,
                                              const WitnessSearchOptions& opts = {});

// Re-checks scaled length (relative tolerance) and the V bound on [l1,l2].
bool validate_witness(const Environment& env, const HillValleyWitness& w, double tol = 1e-6);

// ---------------------------------------------------------------------------

struct MdReport {
    std::size_t samples = 0;
    std::size_t hill_hits = 0;
    std::size_t valley_hits = 0;
    double hill_frequency = 0.0;
    double valley_frequency = 0.0;
    std::size_t probe_stride = 1;  // grid steps between probe points
};

// Monte Carlo diagnostic for the "many close points on a hill / in a valley"
// sufficient condition: per environment, is there a run of `run_length`
// probe points at most `spacing` apart with V < h/2 (valley) or 1 - V < h/2
// (hill)?
MdReport check_md_condition(std::span<const Environment> samples, double h, double spacing,
                            std::size_t run_length);

// ---------------------------------------------------------------------------

// Renewal points and marks covering [lo, hi] (including one point beyond
// each side), exposed for oracles that reconstruct V analytically.
struct RenewalPath {
    std::vector<double> points;
    std::vector<int> marks;
    std::int64_t first_index = 0;
};

RenewalPath renewal_path(const GapLaw& gaps, double p, std::uint64_t seed, double lo, double hi);

// Writes "x,a,V" with a leading comment line recording the model and seed.
void write_csv(const Environment& env, std::ostream& out);

}  // namespace vhj::env
