#include "vhj/homog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "vhj/errors.hpp"
#include "vhj/parallel.hpp"

namespace vhj::homog {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

struct Stats {
    double mean = 0.0;
    double sd = 0.0;
};

// Fixed summation order keeps results independent of scheduling.
Stats stats(const std::vector<double>& v) {
    Stats s;
    if (v.empty()) return s;
    for (double x : v) s.mean += x;
    s.mean /= static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

struct SeedResult {
    SeedRun run;
    SlopeFit fit;
};

SeedResult solve_one(const env::Environment& e, const ham::HamiltonianSpec& G, double beta, double theta,
                     const pde::SolverConfig& cfg) {
    const auto r = pde::solve_linear_data(e, G, beta, theta, cfg);
    SeedResult out;
    out.fit = fit_tail(r.times, r.u_origin, cfg.horizon);
    out.run.seed = e.seed;
    out.run.value = out.fit.slope;
    out.run.fit_residual = out.fit.residual;
    out.run.steps = r.diag.steps;
    out.run.dt = r.diag.dt;
    out.run.alpha = r.diag.alpha;
    out.run.max_slope = r.diag.max_slope;
    out.run.cap_increases = r.diag.cap_increases;
    return out;
}

EffectiveEstimate reduce(double theta, const std::vector<SeedResult>& rs, const pde::SolverConfig& cfg) {
    EffectiveEstimate est;
    est.theta = theta;
    est.method = Method::ParabolicSlope;
    est.horizon = cfg.horizon;
    std::vector<double> vals;
    est.h_upper = -std::numeric_limits<double>::infinity();
    est.h_lower = std::numeric_limits<double>::infinity();
    for (const auto& r : rs) {
        vals.push_back(r.run.value);
        est.fit_residual = std::max(est.fit_residual, r.fit.residual);
        est.h_upper = std::max(est.h_upper, r.fit.window_max);
        est.h_lower = std::min(est.h_lower, r.fit.window_min);
        est.runs.push_back(r.run);
    }
    const auto s = stats(vals);
    est.value = s.mean;
    est.std_error = s.sd;
    return est;
}

// Monotone piecewise-linear data on [lo, hi] sampled from a curve.
struct Bracket {
    std::vector<double> x;
    std::vector<double> f;
};

Bracket bracket_samples(const EffectiveCurve& c, double lo, double hi, bool increasing) {
    const auto& g = c.theta_grid;
    if (g.size() < 2) throw ParameterError("curve needs at least two grid points");
    const double eps = 1e-9 * std::max(1.0, std::abs(hi - lo));
    if (lo < g.front() - eps || hi > g.back() + eps)
        throw ParameterError("curve grid [" + num(g.front()) + ", " + num(g.back()) + "] does not cover [" + num(lo) +
                             ", " + num(hi) + "]");
    Bracket b;
    b.x.push_back(lo);
    b.f.push_back(interpolate(c, lo));
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g[i] > lo + eps && g[i] < hi - eps) {
            b.x.push_back(g[i]);
            b.f.push_back(c.estimates[i].value);
        }
    b.x.push_back(hi);
    b.f.push_back(interpolate(c, hi));
    for (std::size_t i = 1; i < b.f.size(); ++i)
        b.f[i] = increasing ? std::max(b.f[i], b.f[i - 1]) : std::min(b.f[i], b.f[i - 1]);
    return b;
}

double pl(const Bracket& b, double x) {
    if (x <= b.x.front()) return b.f.front();
    if (x >= b.x.back()) return b.f.back();
    const auto it = std::upper_bound(b.x.begin(), b.x.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - b.x.begin());
    const double w = (x - b.x[j - 1]) / (b.x[j] - b.x[j - 1]);
    return b.f[j - 1] + w * (b.f[j] - b.f[j - 1]);
}

// Root of the monotone interpolant minus level on [x.front(), x.back()].
double bisect(const Bracket& b, double level, bool increasing) {
    double lo = b.x.front(), hi = b.x.back();
    for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const bool below = pl(b, mid) < level;
        if (below == increasing) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

const char* to_string(Method m) { return m == Method::ParabolicSlope ? "parabolic_slope" : "discounted_limit"; }

SlopeFit fit_tail(std::span<const double> times, std::span<const double> values, double horizon) {
    if (times.size() != values.size()) throw ParameterError("fit_tail: size mismatch");
    std::vector<double> t, u;
    for (std::size_t k = 0; k < times.size(); ++k)
        if (times[k] >= 0.5 * horizon * (1.0 - 1e-12) && times[k] <= horizon * (1.0 + 1e-12)) {
            t.push_back(times[k]);
            u.push_back(values[k]);
        }
    if (t.size() < 3)
        throw ConfigError("slope fit over [T/2, T] needs at least 3 output times, got " + std::to_string(t.size()));
    const double n = static_cast<double>(t.size());
    double tm = 0.0, um = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        tm += t[k];
        um += u[k];
    }
    tm /= n;
    um /= n;
    double stt = 0.0, stu = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        stt += (t[k] - tm) * (t[k] - tm);
        stu += (t[k] - tm) * (u[k] - um);
    }
    SlopeFit f;
    f.points = t.size();
    f.slope = stu / stt;
    f.intercept = um - f.slope * tm;
    double ss = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const double r = u[k] - (f.intercept + f.slope * t[k]);
        ss += r * r;
    }
    f.residual = std::sqrt(ss / n);
    f.window_max = -std::numeric_limits<double>::infinity();
    f.window_min = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < t.size(); ++k) {
        const double s = (u[k] - u[k - 1]) / (t[k] - t[k - 1]);
        f.window_max = std::max(f.window_max, s);
        f.window_min = std::min(f.window_min, s);
    }
    return f;
}

std::vector<double> EffectiveCurve::values() const {
    std::vector<double> v;
    for (const auto& e : estimates) v.push_back(e.value);
    return v;
}

std::vector<double> EffectiveCurve::std_errors() const {
    std::vector<double> v;
    for (const auto& e : estimates) v.push_back(e.std_error);
    return v;
}

double ensemble_half_width(const ham::HamiltonianSpec& G, double beta, std::span<const double> theta_grid,
                           const pde::SolverConfig& cfg) {
    if (theta_grid.empty()) throw ParameterError("empty theta grid");
    double w = 0.0;
    for (double th : theta_grid) w = std::max(w, pde::required_half_width(G, beta, th, cfg));
    return std::ceil(w / cfg.dx + 1.0) * cfg.dx;
}

std::vector<env::Environment> sample_ensemble(const env::EnvModel& model, std::span<const std::uint64_t> seeds,
                                              double half_width, double dx, unsigned workers) {
    if (seeds.empty()) throw ParameterError("ensemble needs at least one seed");
    const double m = std::ceil(half_width / dx - 1e-9);
    std::vector<env::Environment> out(seeds.size());
    parallel_for(seeds.size(), workers,
                 [&](std::size_t i) { out[i] = env::sample_environment(model, -m * dx, m * dx, dx, seeds[i]); });
    return out;
}

EffectiveEstimate estimate_point(std::span<const env::Environment> ensemble, const ham::HamiltonianSpec& G,
                                 double beta, double theta, const pde::SolverConfig& cfg, unsigned workers) {
    if (ensemble.empty()) throw ParameterError("ensemble must not be empty");
    std::vector<SeedResult> rs(ensemble.size());
    parallel_for(ensemble.size(), workers, [&](std::size_t i) { rs[i] = solve_one(ensemble[i], G, beta, theta, cfg); });
    return reduce(theta, rs, cfg);
}

EffectiveEstimate estimate_point_discounted(std::span<const env::Environment> ensemble,
                                            const ham::HamiltonianSpec& G, double beta, double theta,
                                            const pde::SolverConfig& cfg, std::span<const double> discounts,
                                            unsigned workers) {
    if (ensemble.empty()) throw ParameterError("ensemble must not be empty");
    std::vector<pde::CorrectorProfile> ps(ensemble.size());
    parallel_for(ensemble.size(), workers,
                 [&](std::size_t i) { ps[i] = pde::corrector_profile(ensemble[i], G, beta, theta, cfg, discounts); });
    EffectiveEstimate est;
    est.theta = theta;
    est.method = Method::DiscountedLimit;
    est.discounts.assign(discounts.begin(), discounts.end());
    std::vector<double> vals;
    est.h_upper = -std::numeric_limits<double>::infinity();
    est.h_lower = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ps.size(); ++i) {
        const auto& p = ps[i];
        const double v = p.lambda_limit;
        vals.push_back(v);
        est.h_upper = std::max(est.h_upper, *std::max_element(p.discounted_values.begin(), p.discounted_values.end()));
        est.h_lower = std::min(est.h_lower, *std::min_element(p.discounted_values.begin(), p.discounted_values.end()));
        est.fit_residual = std::max(est.fit_residual, *std::max_element(p.residuals.begin(), p.residuals.end()));
        SeedRun run;
        run.seed = ensemble[i].seed;
        run.value = v;
        run.fit_residual = p.residuals.back();
        est.runs.push_back(run);
    }
    const auto s = stats(vals);
    est.value = s.mean;
    est.std_error = s.sd;
    return est;
}

ConvexityReport check_convexity(std::span<const double> theta, std::span<const double> values, double tol) {
    ConvexityReport r;
    r.tolerance = tol;
    r.min_second_difference = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < theta.size(); ++i) {
        // divided second difference scaled back to the local spacing
        const double h1 = theta[i] - theta[i - 1], h2 = theta[i + 1] - theta[i];
        const double d = (values[i + 1] - values[i]) / h2 - (values[i] - values[i - 1]) / h1;
        r.min_second_difference = std::min(r.min_second_difference, d * 0.5 * (h1 + h2));
    }
    if (theta.size() < 3) r.min_second_difference = 0.0;
    r.ok = r.min_second_difference >= -tol;
    return r;
}

EffectiveCurve estimate_curve(std::span<const env::Environment> ensemble, const ham::HamiltonianSpec& G,
                              double beta, std::span<const double> theta_grid, const pde::SolverConfig& cfg,
                              unsigned workers, double convexity_tol) {
    if (ensemble.empty()) throw ParameterError("ensemble must not be empty");
    if (theta_grid.empty()) throw ParameterError("empty theta grid");
    for (std::size_t i = 1; i < theta_grid.size(); ++i)
        if (!(theta_grid[i] > theta_grid[i - 1])) throw ParameterError("theta grid must increase strictly");
    const std::size_t ns = ensemble.size();
    std::vector<SeedResult> rs(theta_grid.size() * ns);
    parallel_for(rs.size(), workers, [&](std::size_t k) {
        rs[k] = solve_one(ensemble[k % ns], G, beta, theta_grid[k / ns], cfg);
    });
    EffectiveCurve c;
    c.theta_grid.assign(theta_grid.begin(), theta_grid.end());
    c.spec_id = G.id;
    c.beta = beta;
    for (const auto& e : ensemble) c.seeds.push_back(e.seed);
    for (std::size_t i = 0; i < theta_grid.size(); ++i) {
        std::vector<SeedResult> slice(rs.begin() + static_cast<std::ptrdiff_t>(i * ns),
                                      rs.begin() + static_cast<std::ptrdiff_t>((i + 1) * ns));
        c.estimates.push_back(reduce(theta_grid[i], slice, cfg));
    }
    if (G.pieces.size() == 1) c.convexity = check_convexity(c.theta_grid, c.values(), convexity_tol);
    return c;
}

double interpolate(const EffectiveCurve& c, double theta) {
    const auto& g = c.theta_grid;
    if (g.empty()) throw ParameterError("empty curve");
    if (g.size() == 1 || theta <= g.front()) return c.estimates.front().value;
    if (theta >= g.back()) return c.estimates.back().value;
    const auto it = std::upper_bound(g.begin(), g.end(), theta);
    const std::size_t j = static_cast<std::size_t>(it - g.begin());
    const double w = (theta - g[j - 1]) / (g[j] - g[j - 1]);
    return c.estimates[j - 1].value + w * (c.estimates[j].value - c.estimates[j - 1].value);
}

FlatEndpoints flat_endpoints(const EffectiveCurve& curve_minus, const EffectiveCurve& curve_plus, double level,
                             double p_hat, double c_minus, double c_plus, double tol) {
    if (!(c_minus <= p_hat && p_hat <= c_plus)) throw ParameterError("flat_endpoints needs c_minus <= p_hat <= c_plus");
    FlatEndpoints out;

    // curve_plus decreases on [p_hat, c_plus]
    const auto bp = bracket_samples(curve_plus, p_hat, c_plus, false);
    const double fp_lo = bp.f.front(), fp_hi = bp.f.back();
    if (level > fp_lo + tol || level < fp_hi - tol)
        throw RootNotBracketedError("level " + num(level) + " outside [" + num(fp_hi) + ", " + num(fp_lo) +
                                    "] on [p_hat, c_plus]");
    if (level >= fp_lo - tol) {
        out.theta_plus = p_hat;
        out.plus_at_edge = true;
    } else if (level <= fp_hi + tol) {
        out.theta_plus = c_plus;
        out.plus_at_edge = true;
    } else {
        out.theta_plus = bisect(bp, level, false);
    }

    // curve_minus increases on [c_minus, p_hat]
    const auto bm = bracket_samples(curve_minus, c_minus, p_hat, true);
    const double fm_lo = bm.f.front(), fm_hi = bm.f.back();
    if (level > fm_hi + tol || level < fm_lo - tol)
        throw RootNotBracketedError("level " + num(level) + " outside [" + num(fm_lo) + ", " + num(fm_hi) +
                                    "] on [c_minus, p_hat]");
    if (level >= fm_hi - tol) {
        out.theta_minus = p_hat;
        out.minus_at_edge = true;
    } else if (level <= fm_lo + tol) {
        out.theta_minus = c_minus;
        out.minus_at_edge = true;
    } else {
        out.theta_minus = bisect(bm, level, true);
    }
    return out;
}

}  // namespace vhj::homog
