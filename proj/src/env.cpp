#include "vhj/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "vhj/errors.hpp"
#include "vhj/rng.hpp"

namespace vhj::env {

namespace {

constexpr std::uint64_t kStreamDelay = 1;
constexpr std::uint64_t kStreamGap = 2;
constexpr std::uint64_t kStreamMark = 3;
constexpr std::uint64_t kStreamBrownian = 4;
constexpr std::uint64_t kStreamStart = 5;
constexpr std::uint64_t kTagDiffusion = 0xA11CE;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

// Node coordinates of a (possibly extended) sampling grid.
struct Grid {
    double x0 = 0.0;
    double dx = 1.0;
    std::size_t n = 0;
    bool on_lattice = false;
    std::int64_t k0 = 0;

    double x(std::size_t i) const {
        return on_lattice ? static_cast<double>(k0 + static_cast<std::int64_t>(i)) * dx
                          : x0 + static_cast<double>(i) * dx;
    }

    Grid extended(std::size_t m) const {
        Grid g = *this;
        g.n = n + 2 * m;
        g.k0 = k0 - static_cast<std::int64_t>(m);
        g.x0 = x0 - static_cast<double>(m) * dx;
        return g;
    }
};

double draw_gap(const GapLaw& law, std::uint64_t seed, std::int64_t k) {
    const double u = rng::uniform(seed, kStreamGap, k);
    return std::visit(overloaded{
                          [](const PointMassGap& g) { return g.gap; },
                          [u](const UniformGap& g) { return g.lo + u * (g.hi - g.lo); },
                          [u](const ShiftedExpGap& g) { return g.min - g.mean_excess * std::log(u); },
                      },
                      law);
}

// Length of the gap covering the origin under the stationary law
// (size-biased gap distribution).
double draw_covering_gap(const GapLaw& law, std::uint64_t seed) {
    const double u1 = rng::uniform(seed, kStreamDelay, 1);
    const double u2 = rng::uniform(seed, kStreamDelay, 2);
    const double u3 = rng::uniform(seed, kStreamDelay, 3);
    return std::visit(overloaded{
                          [](const PointMassGap& g) { return g.gap; },
                          [u1](const UniformGap& g) {
                              return std::sqrt(g.lo * g.lo + u1 * (g.hi * g.hi - g.lo * g.lo));
                          },
                          [=](const ShiftedExpGap& g) {
                              // density ~ (min + e) exp(-e/mu): mixture of Exp(mu) and Gamma(2, mu)
                              const double mu = g.mean_excess;
                              const double w_exp = g.min / (g.min + mu);
                              double e = -mu * std::log(u2);
                              if (u1 >= w_exp) e += -mu * std::log(u3);
                              return g.min + e;
                          },
                      },
                      law);
}

std::vector<double> tent_weights(double width, double dx) {
    const double half = 0.5 * width;
    std::size_t m = 0;
    while (static_cast<double>(m + 1) * dx < half * (1.0 - 1e-12)) ++m;
    std::vector<double> w(2 * m + 1);
    double sum = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        const double off = std::abs(static_cast<double>(j) - static_cast<double>(m)) * dx;
        w[j] = std::max(0.0, 1.0 - off / half);
        sum += w[j];
    }
    for (double& v : w) v /= sum;
    return w;
}

double tent(double z, double lip) { return std::max(0.0, 1.0 - lip * std::abs(z)); }

std::vector<double> sample_v(const VModel& model, const Grid& g, std::uint64_t seed, double& kappa);

std::vector<double> mollify(const VModel& inner, double width, const Grid& g, std::uint64_t seed,
                            double& kappa) {
    if (!(width > 0.0)) throw ParameterError("mollifier width must be positive");
    const auto w = tent_weights(width, g.dx);
    const std::size_t m = (w.size() - 1) / 2;
    double inner_kappa = 0.0;
    const auto raw = sample_v(inner, g.extended(m), seed, inner_kappa);
    std::vector<double> out(g.n, 0.0);
    for (std::size_t i = 0; i < g.n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) acc += w[j] * raw[i + j];
        out[i] = std::clamp(acc, 0.0, 1.0);
    }
    kappa = *std::max_element(w.begin(), w.end()) / g.dx;
    return out;
}

std::vector<double> sample_v(const VModel& model, const Grid& g, std::uint64_t seed, double& kappa) {
    std::vector<double> v(g.n, 0.0);
    std::visit(
        overloaded{
            [&](const ConstantV& m) {
                if (m.level < 0.0 || m.level > 1.0) throw ParameterError("ConstantV level must lie in [0,1]");
                std::fill(v.begin(), v.end(), m.level);
                kappa = 0.0;
            },
            [&](const PeriodicV& m) {
                if (!(m.period > 0.0)) throw ParameterError("PeriodicV period must be positive");
                for (std::size_t i = 0; i < g.n; ++i) {
                    const double s = (g.x(i) - m.phase) / m.period;
                    if (m.profile == PeriodicProfile::Sine) {
                        v[i] = 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * s));
                    } else {
                        const double f = s - std::floor(s);
                        v[i] = f < 0.5 ? 2.0 * f : 2.0 - 2.0 * f;
                    }
                }
                kappa = m.profile == PeriodicProfile::Sine ? std::numbers::pi / m.period : 2.0 / m.period;
            },
            [&](const RenewalBernoulli& m) {
                validate(m.gaps);
                if (m.p < 0.0 || m.p > 1.0) throw ParameterError("RenewalBernoulli p must lie in [0,1]");
                const auto path = renewal_path(m.gaps, m.p, seed, g.x(0), g.x(g.n - 1));
                std::size_t k = 0;
                for (std::size_t i = 0; i < g.n; ++i) {
                    const double xi = g.x(i);
                    while (k + 2 < path.points.size() && path.points[k + 1] <= xi) ++k;
                    const double s0 = path.points[k], s1 = path.points[k + 1];
                    const double m0 = path.marks[k], m1 = path.marks[k + 1];
                    v[i] = std::clamp(m0 + (xi - s0) * (m1 - m0) / (s1 - s0), 0.0, 1.0);
                }
                kappa = 1.0 / gap_min(m.gaps);
            },
            [&](const ReflectedBM& m) {
                if (!g.on_lattice) throw ParameterError("ReflectedBM requires a grid aligned with the dx lattice");
                if (m.mollifier_width > 0.0) {
                    v = mollify(ReflectedBM{0.0, m.sigma}, m.mollifier_width, g, seed, kappa);
                    return;
                }
                if (!(m.sigma > 0.0)) throw ParameterError("ReflectedBM sigma must be positive");
                const double start = rng::uniform(seed, kStreamStart, 0);
                const double step = m.sigma * std::sqrt(g.dx);
                const std::int64_t k_lo = g.k0;
                const std::int64_t k_hi = g.k0 + static_cast<std::int64_t>(g.n) - 1;
                auto fold = [](double b) {
                    double r = std::fmod(b, 2.0);
                    if (r < 0.0) r += 2.0;
                    return r <= 1.0 ? r : 2.0 - r;
                };
                // Forward branch uses increments with positive indices, the
                // backward branch negative ones; both start from B(0).
                if (k_hi >= 0) {
                    double b = start;
                    for (std::int64_t k = 0; k <= k_hi; ++k) {
                        if (k > 0) b += step * rng::normal(seed, kStreamBrownian, k);
                        if (k >= k_lo) v[static_cast<std::size_t>(k - k_lo)] = fold(b);
                    }
                }
                if (k_lo < 0) {
                    double b = start;
                    for (std::int64_t k = -1; k >= k_lo; --k) {
                        b += step * rng::normal(seed, kStreamBrownian, k);
                        if (k <= k_hi) v[static_cast<std::size_t>(k - k_lo)] = fold(b);
                    }
                }
                kappa = std::numeric_limits<double>::infinity();
            },
            [&](const RigidBump& m) {
                validate(m.gaps);
                if (m.bump_lipschitz < 2.0) throw ParameterError("RigidBump bump Lipschitz constant must be >= 2");
                const auto path = renewal_path(m.gaps, m.p, seed, g.x(0), g.x(g.n - 1));
                std::size_t k = 0;
                for (std::size_t i = 0; i < g.n; ++i) {
                    const double xi = g.x(i);
                    while (k + 2 < path.points.size() && path.points[k + 1] <= xi) ++k;
                    const double s0 = path.points[k], s1 = path.points[k + 1];
                    const double gap = s1 - s0;
                    const double z0 = 2.0 * path.marks[k] - 1.0;
                    const double z1 = 2.0 * path.marks[k + 1] - 1.0;
                    const double bump = z0 * tent((xi - s0) / gap, m.bump_lipschitz) +
                                        z1 * tent((xi - s1) / gap, m.bump_lipschitz);
                    v[i] = std::clamp(0.5 * (1.0 + bump), 0.0, 1.0);
                }
                kappa = m.bump_lipschitz / (2.0 * gap_min(m.gaps));
            },
            [&](const MollifiedWrap& m) {
                if (!m.inner) throw ParameterError("MollifiedWrap without inner model");
                v = mollify(*m.inner, m.width, g, seed, kappa);
            },
        },
        static_cast<const VModel::variant&>(model));
    return v;
}

std::vector<double> sample_sqrt_a(const AModel& model, const Grid& g, std::uint64_t seed, double& kappa) {
    std::vector<double> s(g.n, 0.0);
    std::visit(overloaded{
                   [&](const ConstantA& m) {
                       if (m.level < 0.0 || m.level > 1.0) throw ParameterError("ConstantA level must lie in [0,1]");
                       std::fill(s.begin(), s.end(), std::sqrt(m.level));
                       kappa = 0.0;
                   },
                   [&](const DegenerateA& m) {
                       if (m.level < 0.0 || m.level > 1.0) throw ParameterError("DegenerateA level must lie in [0,1]");
                       if (!(m.period > 0.0) || !(m.sqrt_slope > 0.0))
                           throw ParameterError("DegenerateA needs positive period and slope");
                       const double top = std::sqrt(m.level);
                       for (std::size_t i = 0; i < g.n; ++i) {
                           double d = std::fmod(g.x(i) - m.offset, m.period);
                           if (d < 0.0) d += m.period;
                           const double dist = std::min(d, m.period - d);
                           s[i] = std::min(top, m.sqrt_slope * dist);
                       }
                       kappa = m.sqrt_slope;
                   },
                   [&](const SampledA& m) {
                       if (!m.inner) throw ParameterError("SampledA without inner model");
                       if (m.lo < 0.0 || m.hi > 1.0 || m.lo > m.hi)
                           throw ParameterError("SampledA needs 0 <= lo <= hi <= 1");
                       double inner_kappa = 0.0;
                       const auto w = sample_v(*m.inner, g, rng::derive(seed, kTagDiffusion), inner_kappa);
                       const double slo = std::sqrt(m.lo), shi = std::sqrt(m.hi);
                       for (std::size_t i = 0; i < g.n; ++i) s[i] = slo + (shi - slo) * w[i];
                       kappa = (shi - slo) * inner_kappa;
                   },
               },
               static_cast<const AModel::variant&>(model));
    return s;
}

std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string describe_gaps(const GapLaw& law) {
    return std::visit(overloaded{
                          [](const PointMassGap& g) { return "point_mass(" + fmt_num(g.gap) + ")"; },
                          [](const UniformGap& g) { return "uniform(" + fmt_num(g.lo) + "," + fmt_num(g.hi) + ")"; },
                          [](const ShiftedExpGap& g) {
                              return "shifted_exp(" + fmt_num(g.min) + "," + fmt_num(g.mean_excess) + ")";
                          },
                      },
                      law);
}

// Piecewise-linear integrand 1/(a v delta); cumulative integral at nodes.
std::vector<double> integrand(const Environment& env, double delta) {
    std::vector<double> f(env.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1.0 / std::max(env.a_values[i], delta);
    return f;
}

void check_delta(double delta) {
    if (!(delta > 0.0) || !(delta < 1.0 + 1e-12)) throw ParameterError("delta must lie in (0,1]");
}

// Integral from node i to x, x inside cell [x_i, x_{i+1}].
double partial_cell(const std::vector<double>& f, double dx, std::size_t i, double s) {
    const double fi = f[i];
    const double fj = i + 1 < f.size() ? f[i + 1] : f[i];
    return dx * (fi * s + 0.5 * (fj - fi) * s * s);
}

struct CellPos {
    std::size_t cell;
    double frac;
};

CellPos locate(const Environment& env, double xq) {
    const double rel = (xq - env.x(0)) / env.dx;
    const double n1 = static_cast<double>(env.size() - 1);
    const double r = std::clamp(rel, 0.0, n1);
    std::size_t c = static_cast<std::size_t>(std::floor(r));
    if (c >= env.size() - 1) c = env.size() - 2;
    return {c, r - static_cast<double>(c)};
}

double cumulative_at(const Environment& env, const std::vector<double>& f, const std::vector<double>& cum,
                     double xq) {
    const auto pos = locate(env, xq);
    return cum[pos.cell] + partial_cell(f, env.dx, pos.cell, pos.frac);
}

void check_window(const Environment& env, double l1, double l2) {
    const double eps = 1e-9 * std::max(1.0, env.dx);
    if (env.size() < 2) throw DomainError("environment has fewer than two nodes");
    if (l1 < env.x(0) - eps || l2 > env.x(env.size() - 1) + eps)
        throw DomainError("interval [" + fmt_num(l1) + "," + fmt_num(l2) + "] outside the sampled window");
    if (!(l1 < l2)) throw DomainError("scaled_length needs l1 < l2");
}

bool in_run(const Environment& env, std::size_t i, double h, WitnessKind kind) {
    return kind == WitnessKind::Hill ? env.v_values[i] >= h : env.v_values[i] <= h;
}

}  // namespace

// ---------------------------------------------------------------------------

double gap_min(const GapLaw& law) {
    return std::visit(overloaded{
                          [](const PointMassGap& g) { return g.gap; },
                          [](const UniformGap& g) { return g.lo; },
                          [](const ShiftedExpGap& g) { return g.min; },
                      },
                      law);
}

double gap_mean(const GapLaw& law) {
    return std::visit(overloaded{
                          [](const PointMassGap& g) { return g.gap; },
                          [](const UniformGap& g) { return 0.5 * (g.lo + g.hi); },
                          [](const ShiftedExpGap& g) { return g.min + g.mean_excess; },
                      },
                      law);
}

void validate(const GapLaw& law) {
    std::visit(overloaded{
                   [](const PointMassGap& g) {
                       if (!(g.gap > 0.0)) throw ParameterError("gap_min must be positive");
                   },
                   [](const UniformGap& g) {
                       if (!(g.lo > 0.0) || !(g.hi >= g.lo)) throw ParameterError("uniform gap law needs 0 < lo <= hi");
                   },
                   [](const ShiftedExpGap& g) {
                       if (!(g.min > 0.0) || !(g.mean_excess > 0.0))
                           throw ParameterError("shifted exponential gap law needs positive min and mean");
                   },
               },
               law);
}

std::string describe(const VModel& m) {
    return std::visit(
        overloaded{
            [](const ConstantV& v) { return "ConstantV(" + fmt_num(v.level) + ")"; },
            [](const PeriodicV& v) {
                return std::string("PeriodicV(") + (v.profile == PeriodicProfile::Sine ? "sine" : "triangle") +
                       ",period=" + fmt_num(v.period) + ",phase=" + fmt_num(v.phase) + ")";
            },
            [](const RenewalBernoulli& v) {
                return "RenewalBernoulli(" + describe_gaps(v.gaps) + ",p=" + fmt_num(v.p) + ")";
            },
            [](const ReflectedBM& v) {
                return "ReflectedBM(width=" + fmt_num(v.mollifier_width) + ",sigma=" + fmt_num(v.sigma) + ")";
            },
            [](const RigidBump& v) {
                return "RigidBump(L=" + fmt_num(v.bump_lipschitz) + "," + describe_gaps(v.gaps) + ")";
            },
            [](const MollifiedWrap& v) {
                return "Mollified(" + (v.inner ? describe(*v.inner) : std::string("?")) +
                       ",width=" + fmt_num(v.width) + ")";
            },
        },
        static_cast<const VModel::variant&>(m));
}

std::string describe(const AModel& m) {
    return std::visit(overloaded{
                          [](const ConstantA& a) { return "ConstantA(" + fmt_num(a.level) + ")"; },
                          [](const DegenerateA& a) {
                              return "DegenerateA(level=" + fmt_num(a.level) + ",period=" + fmt_num(a.period) +
                                     ",offset=" + fmt_num(a.offset) + ",slope=" + fmt_num(a.sqrt_slope) + ")";
                          },
                          [](const SampledA& a) {
                              return "SampledA(" + (a.inner ? describe(*a.inner) : std::string("?")) +
                                     ",lo=" + fmt_num(a.lo) + ",hi=" + fmt_num(a.hi) + ")";
                          },
                      },
                      static_cast<const AModel::variant&>(m));
}

std::string describe(const EnvModel& m) { return "V=" + describe(m.v) + ";a=" + describe(m.a); }

// ---------------------------------------------------------------------------

std::size_t Environment::nearest(double xq) const noexcept {
    if (size() == 0) return 0;
    const double r = std::round((xq - x(0)) / dx);
    if (r <= 0.0) return 0;
    const auto i = static_cast<std::size_t>(r);
    return std::min(i, size() - 1);
}

std::optional<std::size_t> Environment::origin_index() const noexcept {
    if (size() == 0) return std::nullopt;
    const std::size_t i = nearest(0.0);
    if (std::abs(x(i)) <= 1e-9 * dx) return i;
    return std::nullopt;
}

Environment Environment::slice(std::size_t first, std::size_t last) const {
    if (first > last || last >= size()) throw DomainError("slice outside environment");
    Environment e = *this;
    e.a_values.assign(a_values.begin() + static_cast<std::ptrdiff_t>(first),
                      a_values.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    e.v_values.assign(v_values.begin() + static_cast<std::ptrdiff_t>(first),
                      v_values.begin() + static_cast<std::ptrdiff_t>(last) + 1);
    e.lattice_offset_ = lattice_offset_ + static_cast<std::int64_t>(first);
    e.x0_ = x(first);
    e.grid_min = x(first);
    e.grid_max = x(last);
    return e;
}

Environment sample_environment(const EnvModel& model, double grid_min, double grid_max, double dx,
                               std::uint64_t seed) {
    if (!(dx > 0.0)) throw ParameterError("dx must be positive");
    if (!(grid_max > grid_min)) throw ParameterError("grid_max must exceed grid_min");
    const double span = (grid_max - grid_min) / dx;
    const auto n = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;

    Grid g;
    g.dx = dx;
    g.n = n;
    g.x0 = grid_min;
    const double kr = std::round(grid_min / dx);
    if (std::abs(grid_min - kr * dx) <= 1e-9 * std::max(1.0, std::abs(grid_min))) {
        g.on_lattice = true;
        g.k0 = static_cast<std::int64_t>(kr);
    }

    Environment env;
    env.grid_min = grid_min;
    env.grid_max = grid_max;
    env.dx = dx;
    env.model = model;
    env.seed = seed;
    env.x0_ = grid_min;
    env.on_lattice_ = g.on_lattice;
    env.lattice_offset_ = g.k0;

    double kv = 0.0, ka = 0.0;
    env.v_values = sample_v(model.v, g, seed, kv);
    const auto sqrt_a = sample_sqrt_a(model.a, g, seed, ka);
    env.a_values.resize(n);
    for (std::size_t i = 0; i < n; ++i) env.a_values[i] = sqrt_a[i] * sqrt_a[i];
    env.kappa = std::max(kv, ka);
    return env;
}

LipschitzReport check_lipschitz(const Environment& env, double tol) {
    LipschitzReport r;
    for (std::size_t i = 0; i < env.size(); ++i) {
        const double a = env.a_values[i], v = env.v_values[i];
        if (a < 0.0 || a > 1.0 || v < 0.0 || v > 1.0) r.values_in_unit_interval = false;
        if (i + 1 < env.size()) {
            r.max_sqrt_a_slope = std::max(
                r.max_sqrt_a_slope, std::abs(std::sqrt(env.a_values[i + 1]) - std::sqrt(a)) / env.dx);
            r.max_v_slope = std::max(r.max_v_slope, std::abs(env.v_values[i + 1] - v) / env.dx);
        }
    }
    const double cap = env.kappa * (1.0 + tol);
    r.ok = r.values_in_unit_interval && r.max_sqrt_a_slope <= cap && r.max_v_slope <= cap;
    return r;
}

// ---------------------------------------------------------------------------

std::vector<double> cumulative_scaled_length(const Environment& env, double delta) {
    check_delta(delta);
    const auto f = integrand(env, delta);
    std::vector<double> cum(env.size(), 0.0);
    for (std::size_t i = 1; i < cum.size(); ++i) cum[i] = cum[i - 1] + 0.5 * env.dx * (f[i - 1] + f[i]);
    return cum;
}

double scaled_length(const Environment& env, double l1, double l2, double delta) {
    check_delta(delta);
    check_window(env, l1, l2);
    const auto f = integrand(env, delta);
    const auto p1 = locate(env, l1);
    const auto p2 = locate(env, l2);
    double total = 0.0;
    for (std::size_t i = p1.cell; i < p2.cell; ++i) total += 0.5 * env.dx * (f[i] + f[i + 1]);
    total += partial_cell(f, env.dx, p2.cell, p2.frac) - partial_cell(f, env.dx, p1.cell, p1.frac);
    return total;
}

double invert_scaled_length(const Environment& env, double from, double target, double delta) {
    check_delta(delta);
    const double top = env.x(env.size() - 1);
    if (!(target >= 0.0)) throw ParameterError("target scaled length must be nonnegative");
    if (target == 0.0) return from;
    if (scaled_length(env, from, top, delta) < target)
        throw DomainError("scaled length to the window end is below the target");
    const auto f = integrand(env, delta);
    std::vector<double> cum(env.size(), 0.0);
    for (std::size_t i = 1; i < cum.size(); ++i) cum[i] = cum[i - 1] + 0.5 * env.dx * (f[i - 1] + f[i]);
    const double goal = cumulative_at(env, f, cum, from) + target;
    double lo = from, hi = top;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cumulative_at(env, f, cum, mid) < goal) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::optional<HillValleyWitness> find_witness(const Environment& env, double h, double y, WitnessKind kind,
                                              const WitnessSearchOptions& opts) {
    if (!(h > 0.0 && h < 1.0)) throw ParameterError("h must lie in (0,1)");
    if (!(y > 0.0)) throw ParameterError("y must be positive");
    if (!(opts.delta_min > 0.0 && opts.delta_min < 1.0)) throw ParameterError("delta_min must lie in (0,1)");
    const double target = 2.0 * y;
    std::size_t i = 0;
    const std::size_t n = env.size();
    while (i < n) {
        if (!in_run(env, i, h, kind)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < n && in_run(env, j + 1, h, kind)) ++j;
        if (j > i) {
            const double l1 = env.x(i), lr = env.x(j);
            if (scaled_length(env, l1, lr, opts.delta_min) >= target) {
                HillValleyWitness w{l1, lr, opts.delta_min, h, y, kind};
                if (lr - l1 >= target) {
                    w.l2 = invert_scaled_length(env, l1, target, opts.delta_min);
                } else {
                    // scaled length of [l1, lr] decreases in delta and equals
                    // the Euclidean length at delta = 1
                    double lo = std::log(opts.delta_min), hi = 0.0;
                    for (int it = 0; it < 200; ++it) {
                        const double mid = 0.5 * (lo + hi);
                        if (scaled_length(env, l1, lr, std::exp(mid)) >= target) lo = mid;
                        else hi = mid;
                    }
                    w.delta = std::exp(lo);
                }
                return w;
            }
        }
        i = j + 1;
    }
    return std::nullopt;
}

bool validate_witness(const Environment& env, const HillValleyWitness& w, double tol) {
    if (!(w.l1 < w.l2) || !(w.delta > 0.0 && w.delta < 1.0)) return false;
    if (!(w.h > 0.0 && w.h < 1.0) || !(w.y > 0.0)) return false;
    const double len = scaled_length(env, w.l1, w.l2, w.delta);
    if (std::abs(len - 2.0 * w.y) > tol * std::max(1.0, 2.0 * w.y)) return false;
    // V is piecewise linear: extrema on [l1,l2] sit at nodes or at the ends.
    auto interp = [&](double xq) {
        const auto p = locate(env, xq);
        return env.v_values[p.cell] + p.frac * (env.v_values[p.cell + 1] - env.v_values[p.cell]);
    };
    auto ok = [&](double v) { return w.kind == WitnessKind::Hill ? v >= w.h : v <= w.h; };
    if (!ok(interp(w.l1)) || !ok(interp(w.l2))) return false;
    for (std::size_t i = 0; i < env.size(); ++i) {
        const double xi = env.x(i);
        if (xi > w.l1 && xi < w.l2 && !ok(env.v_values[i])) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

MdReport check_md_condition(std::span<const Environment> samples, double h, double spacing,
                            std::size_t run_length) {
    if (samples.empty()) throw ParameterError("check_md_condition needs at least one environment");
    if (!(h > 0.0 && h < 1.0)) throw ParameterError("h must lie in (0,1)");
    if (run_length == 0) throw ParameterError("run_length must be positive");
    double kappa = 0.0;
    for (const auto& e : samples) kappa = std::max(kappa, e.kappa);
    if (!(spacing > 0.0) || !(spacing * 2.0 * kappa < 1.0))
        throw ParameterError("spacing must be positive and below 1/(2 kappa)");

    MdReport rep;
    rep.samples = samples.size();
    const double dx = samples.front().dx;
    rep.probe_stride = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(spacing / dx + 1e-9)));
    const std::size_t reach = (run_length - 1) * rep.probe_stride;

    for (const auto& e : samples) {
        bool hill = false, valley = false;
        for (std::size_t s = 0; s + reach < e.size() && !(hill && valley); ++s) {
            bool all_hill = true, all_valley = true;
            for (std::size_t r = 0; r < run_length; ++r) {
                const double v = e.v_values[s + r * rep.probe_stride];
                all_hill = all_hill && (1.0 - v < 0.5 * h);
                all_valley = all_valley && (v < 0.5 * h);
            }
            hill = hill || all_hill;
            valley = valley || all_valley;
        }
        rep.hill_hits += hill ? 1 : 0;
        rep.valley_hits += valley ? 1 : 0;
    }
    rep.hill_frequency = static_cast<double>(rep.hill_hits) / static_cast<double>(rep.samples);
    rep.valley_frequency = static_cast<double>(rep.valley_hits) / static_cast<double>(rep.samples);
    return rep;
}

RenewalPath renewal_path(const GapLaw& gaps, double p, std::uint64_t seed, double lo, double hi) {
    validate(gaps);
    if (!(hi >= lo)) throw ParameterError("renewal_path needs lo <= hi");
    // S_{-1} <= 0 < S_0 with the covering gap size-biased and the origin
    // uniform inside it.
    const double cover = draw_covering_gap(gaps, seed);
    const double s0 = rng::uniform(seed, kStreamDelay, 0) * cover;

    std::vector<double> fwd{s0};
    while (fwd.back() < hi) fwd.push_back(fwd.back() + draw_gap(gaps, seed, static_cast<std::int64_t>(fwd.size())));
    std::vector<double> bwd{s0 - cover};  // index -1
    while (bwd.back() > lo) bwd.push_back(bwd.back() - draw_gap(gaps, seed, -static_cast<std::int64_t>(bwd.size()) - 1));

    RenewalPath path;
    // Keep the last point <= lo through the first point >= hi.
    std::vector<std::pair<std::int64_t, double>> all;
    for (std::size_t k = bwd.size(); k-- > 0;) all.emplace_back(-static_cast<std::int64_t>(k) - 1, bwd[k]);
    for (std::size_t k = 0; k < fwd.size(); ++k) all.emplace_back(static_cast<std::int64_t>(k), fwd[k]);
    std::size_t first = 0;
    while (first + 1 < all.size() && all[first + 1].second <= lo) ++first;
    std::size_t last = all.size() - 1;
    while (last > first + 1 && all[last - 1].second >= hi) --last;
    path.first_index = all[first].first;
    for (std::size_t k = first; k <= last; ++k) {
        path.points.push_back(all[k].second);
        path.marks.push_back(rng::uniform(seed, kStreamMark, all[k].first) < p ? 1 : 0);
    }
    return path;
}

void write_csv(const Environment& env, std::ostream& out) {
    out << "# model=" << describe(env.model) << " seed=" << env.seed << " dx=" << fmt_num(env.dx) << "\n";
    out << "x,a,V\n";
    char buf[96];
    for (std::size_t i = 0; i < env.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g,%.12g,%.12g\n", env.x(i), env.a_values[i], env.v_values[i]);
        out << buf;
    }
}

}  // namespace vhj::env
