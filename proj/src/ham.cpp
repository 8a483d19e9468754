#include "vhj/ham.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "vhj/errors.hpp"

namespace vhj::ham {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

inline double ipow(double x, double gamma) {
    if (gamma == 2.0) return x * x;
    if (gamma == 1.0) return x;
    if (gamma == 3.0) return x * x * x;
    return std::pow(x, gamma);
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

double tab_eval(const TabulatedConvex& t, double p) {
    const auto& k = t.knots;
    const auto& v = t.values;
    const std::size_t n = k.size();
    if (p <= k.front()) {
        const double s = (v[1] - v[0]) / (k[1] - k[0]);
        const double d = k.front() - p;
        return v[0] - s * d + t.ext_scale * ipow(d, t.gamma);
    }
    if (p >= k.back()) {
        const double s = (v[n - 1] - v[n - 2]) / (k[n - 1] - k[n - 2]);
        const double d = p - k.back();
        return v[n - 1] + s * d + t.ext_scale * ipow(d, t.gamma);
    }
    const auto it = std::upper_bound(k.begin(), k.end(), p);
    const std::size_t j = static_cast<std::size_t>(it - k.begin());
    const double w = (p - k[j - 1]) / (k[j] - k[j - 1]);
    return v[j - 1] + w * (v[j] - v[j - 1]);
}

double tab_deriv(const TabulatedConvex& t, double p) {
    const auto& k = t.knots;
    const auto& v = t.values;
    const std::size_t n = k.size();
    if (p < k.front()) {
        const double s = (v[1] - v[0]) / (k[1] - k[0]);
        const double d = k.front() - p;
        return s - t.ext_scale * t.gamma * ipow(d, t.gamma - 1.0);
    }
    if (p >= k.back()) {
        const double s = (v[n - 1] - v[n - 2]) / (k[n - 1] - k[n - 2]);
        const double d = p - k.back();
        return s + t.ext_scale * t.gamma * ipow(d, t.gamma - 1.0);
    }
    const auto it = std::upper_bound(k.begin(), k.end(), p);
    const std::size_t j = static_cast<std::size_t>(it - k.begin());
    return (v[j] - v[j - 1]) / (k[j] - k[j - 1]);
}

// Smallest r >= 0 with f(r) >= level for nondecreasing f on [0, inf).
template <class F>
double first_reach(F f, double level, double tol) {
    if (f(0.0) >= level) return 0.0;
    double hi = 1.0;
    int grow = 0;
    while (f(hi) < level) {
        hi *= 2.0;
        if (++grow > 200) throw NumericError("level unreachable on branch", grow);
    }
    double lo = 0.0;
    for (int it = 0; it < 300 && hi - lo > tol * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < level) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double eval(const ConvexPiece& g, double p) {
    const double d = p - g.well;
    return std::visit(overloaded{
                          [d](const PowerWell& s) { return s.scale * ipow(std::abs(d), s.gamma); },
                          [d](const AsymmetricPowerWell& s) {
                              return (d < 0.0 ? s.scale_left : s.scale_right) * ipow(std::abs(d), s.gamma);
                          },
                          [p](const TabulatedConvex& s) { return tab_eval(s, p); },
                      },
                      g.shape);
}

double deriv(const ConvexPiece& g, double p) {
    const double d = p - g.well;
    return std::visit(overloaded{
                          [d](const PowerWell& s) {
                              if (d == 0.0) return 0.0;
                              const double m = s.scale * s.gamma * ipow(std::abs(d), s.gamma - 1.0);
                              return d < 0.0 ? -m : m;
                          },
                          [d](const AsymmetricPowerWell& s) {
                              if (d == 0.0) return 0.0;
                              const double c = d < 0.0 ? s.scale_left : s.scale_right;
                              const double m = c * s.gamma * ipow(std::abs(d), s.gamma - 1.0);
                              return d < 0.0 ? -m : m;
                          },
                          [p](const TabulatedConvex& s) { return tab_deriv(s, p); },
                      },
                      g.shape);
}

void validate(const ConvexPiece& g) {
    std::visit(overloaded{
                   [](const PowerWell& s) {
                       if (!(s.gamma >= 1.0) || !(s.scale > 0.0))
                           throw ParameterError("PowerWell needs gamma >= 1 and scale > 0");
                   },
                   [](const AsymmetricPowerWell& s) {
                       if (!(s.gamma >= 1.0) || !(s.scale_left > 0.0) || !(s.scale_right > 0.0))
                           throw ParameterError("AsymmetricPowerWell needs gamma >= 1 and positive scales");
                   },
                   [&g](const TabulatedConvex& s) {
                       if (s.knots.size() < 2 || s.knots.size() != s.values.size())
                           throw ParameterError("TabulatedConvex needs >= 2 knot/value pairs");
                       if (!(s.gamma >= 1.0) || !(s.ext_scale >= 0.0))
                           throw ParameterError("TabulatedConvex needs gamma >= 1 and ext_scale >= 0");
                       double prev = -std::numeric_limits<double>::infinity();
                       double scale = 1.0;
                       for (double v : s.values) scale = std::max(scale, std::abs(v));
                       for (std::size_t i = 1; i < s.knots.size(); ++i) {
                           if (!(s.knots[i] > s.knots[i - 1]))
                               throw ParameterError("TabulatedConvex knots must increase strictly");
                           const double slope = (s.values[i] - s.values[i - 1]) / (s.knots[i] - s.knots[i - 1]);
                           if (slope < prev - 1e-9 * scale / (s.knots[i] - s.knots[i - 1]))
                               throw ParameterError("TabulatedConvex values are not convex");
                           prev = slope;
                       }
                       if (g.well < s.knots.front() || g.well > s.knots.back())
                           throw ParameterError("TabulatedConvex well outside the table");
                       const double at_well = tab_eval(s, g.well);
                       const double lowest = *std::min_element(s.values.begin(), s.values.end());
                       if (std::abs(at_well) > 1e-9 * scale || lowest < -1e-9 * scale)
                           throw ParameterError("TabulatedConvex must vanish at its well and be nonnegative");
                   },
               },
               g.shape);
}

ConvexPiece shifted(const ConvexPiece& g, double k) {
    ConvexPiece out = g;
    out.well = g.well - k;
    if (auto* t = std::get_if<TabulatedConvex>(&out.shape))
        for (double& x : t->knots) x -= k;
    return out;
}

ConvexPiece reflected(const ConvexPiece& g) {
    ConvexPiece out = g;
    out.well = -g.well;
    std::visit(overloaded{
                   [](PowerWell&) {},
                   [](AsymmetricPowerWell& s) { std::swap(s.scale_left, s.scale_right); },
                   [](TabulatedConvex& s) {
                       std::reverse(s.knots.begin(), s.knots.end());
                       std::reverse(s.values.begin(), s.values.end());
                       for (double& x : s.knots) x = -x;
                   },
               },
               out.shape);
    return out;
}

// ---------------------------------------------------------------------------

double crossing_point(const ConvexPiece& gi, const ConvexPiece& gj, double tol) {
    if (!(gi.well < gj.well)) throw StructureError("crossing_point needs gi.well < gj.well");
    auto d = [&](double p) { return eval(gi, p) - eval(gj, p); };
    const double lo = gi.well, hi = gj.well;
    if (d(lo) >= 0.0 || d(hi) <= 0.0)
        throw StructureError("pieces with wells " + num(lo) + ", " + num(hi) + " touch at a well (tangential crossing)");
    constexpr int kScan = 1000;
    int changes = 0;
    double br_lo = lo, br_hi = hi;
    int sign_prev = -1;
    double x_prev = lo;
    for (int k = 1; k <= kScan; ++k) {
        const double x = lo + (hi - lo) * k / kScan;
        const double v = d(x);
        const int s = v > 0.0 ? 1 : (v < 0.0 ? -1 : 0);
        if (s != 0 && s != sign_prev) {
            ++changes;
            br_lo = x_prev;
            br_hi = x;
            sign_prev = s;
        }
        if (s != 0) x_prev = x;
    }
    if (changes != 1)
        throw StructureError("pieces with wells " + num(lo) + ", " + num(hi) + " cross " + std::to_string(changes) +
                             " times on the scan grid");
    for (int it = 0; it < 300 && br_hi - br_lo > tol * std::max(1.0, std::abs(br_hi)); ++it) {
        const double mid = 0.5 * (br_lo + br_hi);
        if (d(mid) < 0.0) br_lo = mid;
        else br_hi = mid;
    }
    return 0.5 * (br_lo + br_hi);
}

HamiltonianSpec make_spec(std::vector<ConvexPiece> pieces, double alpha0, double alpha1, double gamma,
                          std::string id) {
    if (pieces.empty()) throw ParameterError("a Hamiltonian needs at least one piece");
    if (!(alpha0 > 0.0) || !(alpha1 > 0.0) || !(gamma >= 1.0))
        throw ParameterError("alpha0, alpha1 must be positive and gamma >= 1");
    for (const auto& g : pieces) validate(g);
    for (std::size_t i = 1; i < pieces.size(); ++i)
        if (!(pieces[i].well > pieces[i - 1].well)) throw StructureError("wells must increase strictly");

    HamiltonianSpec spec;
    spec.alpha0 = alpha0;
    spec.alpha1 = alpha1;
    spec.gamma = gamma;
    spec.pieces = std::move(pieces);
    spec.id = std::move(id);
    for (std::size_t i = 0; i + 1 < spec.pieces.size(); ++i)
        spec.crossings.push_back(crossing_point(spec.pieces[i], spec.pieces[i + 1]));
    for (std::size_t i = 1; i < spec.crossings.size(); ++i)
        if (!(spec.crossings[i] > spec.crossings[i - 1])) throw StructureError("crossing points are not ordered");

    // The minimum must follow piece i between consecutive crossings.
    if (spec.pieces.size() > 1) {
        const double lo = spec.pieces.front().well - 1.0, hi = spec.pieces.back().well + 1.0;
        constexpr int kScan = 2000;
        for (int k = 0; k <= kScan; ++k) {
            const double p = lo + (hi - lo) * k / kScan;
            std::size_t expect = 0;
            while (expect < spec.crossings.size() && p > spec.crossings[expect]) ++expect;
            const double want = eval(spec.pieces[expect], p);
            const double got = eval(spec, p);
            if (got < want - 1e-12 * std::max(1.0, std::abs(want)))
                throw StructureError("non-adjacent piece is active at p = " + num(p));
        }
    }
    if (spec.id.empty()) spec.id = describe(spec);
    return spec;
}

HamiltonianSpec power_multi_well(const std::vector<double>& wells, double gamma, double scale) {
    if (wells.empty()) throw ParameterError("power_multi_well needs at least one well");
    double cmax = 1.0;
    for (double c : wells) cmax = std::max(cmax, std::abs(c));
    const double alpha0 = std::min({1.0, scale / std::pow(2.0, gamma), std::pow(2.0 * cmax + 1.0, -0.5 * gamma)});
    const double alpha1 =
        std::max(scale * std::pow(2.0, gamma - 1.0) * std::pow(cmax, gamma), scale * gamma * std::pow(cmax, gamma - 1.0)) +
        1.0;
    std::vector<ConvexPiece> pieces;
    for (double c : wells) pieces.push_back({c, PowerWell{gamma, scale}});
    return make_spec(std::move(pieces), alpha0, alpha1, gamma);
}

HamiltonianSpec power_two_well(double c_minus, double c_plus, double gamma, double scale) {
    return power_multi_well({c_minus, c_plus}, gamma, scale);
}

double eval(const HamiltonianSpec& spec, double p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : spec.pieces) best = std::min(best, eval(g, p));
    return best;
}

std::size_t active_piece(const HamiltonianSpec& spec, double p) {
    std::size_t arg = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.pieces.size(); ++i) {
        const double v = eval(spec.pieces[i], p);
        if (v < best) {
            best = v;
            arg = i;
        }
    }
    return arg;
}

double deriv(const HamiltonianSpec& spec, double p) { return deriv(spec.pieces[active_piece(spec, p)], p); }

double max_abs_derivative(const HamiltonianSpec& spec, double lo, double hi, std::size_t samples) {
    if (!(hi >= lo)) throw ParameterError("max_abs_derivative needs lo <= hi");
    samples = std::max<std::size_t>(samples, 2);
    double m = 0.0;
    for (std::size_t k = 0; k < samples; ++k) {
        const double p = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(samples - 1);
        m = std::max(m, std::abs(deriv(spec, p)));
    }
    // one-sided derivatives of both neighbours at each crossing
    for (std::size_t i = 0; i < spec.crossings.size(); ++i) {
        const double c = spec.crossings[i];
        if (c < lo || c > hi) continue;
        m = std::max({m, std::abs(deriv(spec.pieces[i], c)), std::abs(deriv(spec.pieces[i + 1], c))});
    }
    return m;
}

HamiltonianSpec shifted(const HamiltonianSpec& spec, double k) {
    std::vector<ConvexPiece> pieces;
    for (const auto& g : spec.pieces) pieces.push_back(shifted(g, k));
    return make_spec(std::move(pieces), spec.alpha0, spec.alpha1, spec.gamma, spec.id + "+shift(" + num(k) + ")");
}

HamiltonianSpec single(const HamiltonianSpec& spec, std::size_t i) {
    if (i >= spec.pieces.size()) throw ParameterError("piece index out of range");
    return make_spec({spec.pieces[i]}, spec.alpha0, spec.alpha1, spec.gamma, spec.id + "[" + std::to_string(i) + "]");
}

HamiltonianSpec pair(const HamiltonianSpec& spec, std::size_t i) {
    if (i + 1 >= spec.pieces.size()) throw ParameterError("pair index out of range");
    return make_spec({spec.pieces[i], spec.pieces[i + 1]}, spec.alpha0, spec.alpha1, spec.gamma,
                     spec.id + "[" + std::to_string(i) + "," + std::to_string(i + 1) + "]");
}

// ---------------------------------------------------------------------------

LevelRoots level_roots(const ConvexPiece& g, double lambda, double beta) {
    if (!(beta >= 0.0)) throw ParameterError("beta must be nonnegative");
    const double tol = 1e-13;
    auto right = [&](double r) { return eval(g, g.well + r); };
    auto left = [&](double r) { return eval(g, g.well - r); };
    LevelRoots out;
    const double low = lambda - beta;
    if (low >= 0.0) {
        out.a_minus = first_reach(right, low, tol);
        out.a_plus = first_reach(left, low, tol);
    }
    if (lambda >= 0.0) {
        out.b_minus = first_reach(right, lambda, tol);
        out.b_plus = first_reach(left, lambda, tol);
    }
    return out;
}

std::vector<double> convex_envelope(std::span<const double> x, std::span<const double> f) {
    if (x.size() != f.size()) throw ParameterError("convex_envelope: size mismatch");
    const std::size_t n = x.size();
    if (n < 2) throw ParameterError("convex_envelope needs at least 2 points");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(x[i]) || !std::isfinite(f[i])) throw ParameterError("convex_envelope: non-finite input");
        if (i > 0 && !(x[i] > x[i - 1])) throw ParameterError("convex_envelope: grid must increase strictly");
    }
    std::vector<std::size_t> hull;
    for (std::size_t i = 0; i < n; ++i) {
        while (hull.size() >= 2) {
            const std::size_t a = hull[hull.size() - 2], b = hull.back();
            // drop b when it lies on or above the chord a..i
            const double cross = (x[b] - x[a]) * (f[i] - f[a]) - (f[b] - f[a]) * (x[i] - x[a]);
            if (cross <= 0.0) hull.pop_back();
            else break;
        }
        hull.push_back(i);
    }
    std::vector<double> out(n);
    std::size_t s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (s + 1 < hull.size() && hull[s + 1] < i) ++s;
        const std::size_t a = hull[s];
        if (a == i) {
            out[i] = f[i];
            continue;
        }
        const std::size_t b = hull[s + 1];
        if (b == i) {
            out[i] = f[i];
            continue;
        }
        const double w = (x[i] - x[a]) / (x[b] - x[a]);
        out[i] = std::min(f[i], f[a] + w * (f[b] - f[a]));
    }
    return out;
}

double two_well_convexification(const HamiltonianSpec& spec, double p) {
    if (spec.pieces.size() != 2) throw StructureError("two_well_convexification needs exactly two pieces");
    const auto& gm = spec.pieces[0];
    const auto& gp = spec.pieces[1];
    if (p <= gm.well) return eval(gm, p);
    if (p >= gp.well) return eval(gp, p);
    return 0.0;
}

ConvexPiece tabulate_two_well_convexification(const HamiltonianSpec& spec, double lo, double hi, std::size_t n) {
    if (spec.pieces.size() != 2) throw StructureError("two_well_convexification needs exactly two pieces");
    if (n < 3 || !(hi > lo)) throw ParameterError("tabulation needs n >= 3 and lo < hi");
    const double c_minus = spec.pieces[0].well, c_plus = spec.pieces[1].well;
    if (!(lo < c_minus && hi > c_plus)) throw ParameterError("tabulation range must contain both wells");
    TabulatedConvex t;
    t.gamma = spec.gamma;
    t.ext_scale = 0.0;
    for (const auto& g : spec.pieces)
        if (const auto* pw = std::get_if<PowerWell>(&g.shape)) t.ext_scale = std::max(t.ext_scale, pw->scale);
    if (t.ext_scale == 0.0) t.ext_scale = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double p = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n - 1);
        t.knots.push_back(p);
        t.values.push_back(two_well_convexification(spec, p));
    }
    // keep the wells as exact knots so the flat bottom is exactly zero
    for (double c : {c_minus, c_plus}) {
        auto it = std::lower_bound(t.knots.begin(), t.knots.end(), c);
        if (it != t.knots.end() && std::abs(*it - c) < 1e-12) continue;
        const auto pos = it - t.knots.begin();
        t.knots.insert(it, c);
        t.values.insert(t.values.begin() + pos, 0.0);
    }
    return ConvexPiece{0.5 * (c_minus + c_plus), std::move(t)};
}

GrowthReport check_growth_and_modulus(const HamiltonianSpec& spec, double p_max, std::size_t samples) {
    if (!(p_max > 0.0)) throw ParameterError("p_max must be positive");
    samples = std::max<std::size_t>(samples, 3);
    std::vector<double> p(samples), g(samples);
    for (std::size_t k = 0; k < samples; ++k) {
        p[k] = -p_max + 2.0 * p_max * static_cast<double>(k) / static_cast<double>(samples - 1);
        g[k] = eval(spec, p[k]);
    }
    GrowthReport r;
    r.lower_margin = std::numeric_limits<double>::infinity();
    r.upper_margin = std::numeric_limits<double>::infinity();
    r.modulus_margin = std::numeric_limits<double>::infinity();
    const double a0 = spec.alpha0, a1 = spec.alpha1, gm = spec.gamma;
    for (std::size_t k = 0; k < samples; ++k) {
        const double pg = std::pow(std::abs(p[k]), gm);
        const double lower = g[k] - (a0 * pg - 1.0 / a0);
        if (lower < r.lower_margin) {
            r.lower_margin = lower;
            r.worst_lower_p = p[k];
        }
        r.upper_margin = std::min(r.upper_margin, a1 * (pg + 1.0) - g[k]);
        for (std::size_t j = k + 1; j < samples; ++j) {
            const double bound = a1 * std::pow(std::abs(p[k]) + std::abs(p[j]) + 1.0, gm - 1.0) * (p[j] - p[k]);
            r.modulus_margin = std::min(r.modulus_margin, bound - std::abs(g[j] - g[k]));
        }
    }
    const double tol = 1e-12;
    r.growth_ok = r.lower_margin >= -tol && r.upper_margin >= -tol;
    r.modulus_ok = r.modulus_margin >= -tol;
    r.ok = r.growth_ok && r.modulus_ok;
    return r;
}

std::string describe(const ConvexPiece& g) {
    return std::visit(overloaded{
                          [&](const PowerWell& s) {
                              return num(s.scale) + "|p-" + num(g.well) + "|^" + num(s.gamma);
                          },
                          [&](const AsymmetricPowerWell& s) {
                              return "asym(" + num(s.scale_left) + "," + num(s.scale_right) + ")|p-" + num(g.well) +
                                     "|^" + num(s.gamma);
                          },
                          [&](const TabulatedConvex& s) {
                              return "table(" + std::to_string(s.knots.size()) + " knots,well=" + num(g.well) + ")";
                          },
                      },
                      g.shape);
}

std::string describe(const HamiltonianSpec& spec) {
    std::string s;
    for (std::size_t i = 0; i < spec.pieces.size(); ++i) {
        if (i) s += " ^ ";
        s += describe(spec.pieces[i]);
    }
    return s;
}

}  // namespace vhj::ham
