#include "vhj/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "fast_ham.hpp"
#include "vhj/errors.hpp"

namespace vhj::pde {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double max_of(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
}

void check_grid(const env::Environment& e, const SolverConfig& cfg) {
    if (!(cfg.dx > 0.0)) throw ConfigError("dx must be positive");
    if (std::abs(e.dx - cfg.dx) > 1e-12 * cfg.dx)
        throw ConfigError("environment dx " + num(e.dx) + " differs from solver dx " + num(cfg.dx));
    if (!(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0)) throw ConfigError("cfl_safety must lie in (0,1]");
}

std::size_t origin_or_throw(const env::Environment& e) {
    const auto o = e.origin_index();
    if (!o) throw ConfigError("x = 0 is not a grid node of the environment");
    return *o;
}

// Node range [first, last] of half-width w around the origin.
std::pair<std::size_t, std::size_t> window(const env::Environment& e, double w) {
    const std::size_t o = origin_or_throw(e);
    const auto m = static_cast<std::size_t>(std::ceil(w / e.dx - 1e-9));
    if (m > o || o + m >= e.size())
        throw ConfigError("domain too small: need half-width " + num(w) + " around x = 0, environment covers [" +
                          num(e.x(0)) + ", " + num(e.x(e.size() - 1)) + "]");
    return {o - m, o + m};
}

struct Kernel {
    const detail::FastG& g;
    const double* a;
    const double* v;
    double beta, theta, dx, alpha, dt;

    // Advances w on [lo, hi] (state indices) into out. Ghosts at 0 and n-1
    // copy the neighbour. Returns the largest |average slope|.
    double run(const std::vector<double>& w, std::vector<double>& out, std::size_t lo, std::size_t hi) const {
        const std::size_t n = w.size();
        const double idx = 1.0 / dx, idx2 = idx * idx;
        double smax = 0.0;
        for (std::size_t i = lo; i <= hi; ++i) {
            const double wc = w[i];
            const double wm = i > 0 ? w[i - 1] : wc;
            const double wp = i + 1 < n ? w[i + 1] : wc;
            const double lap = wp - 2.0 * wc + wm;
            const double avg = theta + 0.5 * (wp - wm) * idx;
            smax = std::max(smax, std::abs(avg));
            const double flux = g(avg) + 0.5 * alpha * lap * idx;
            out[i] = wc + dt * (a[i] * lap * idx2 + flux + beta * v[i]);
        }
        return smax;
    }
};

// Distance from which boundary effects can reach a node within time s:
// transport at speed alpha plus eight diffusion lengths.
double reach(double alpha, double a_max, double s, double margin) {
    return alpha * s + margin + 8.0 * std::sqrt(a_max * s);
}

void check_finite(const std::vector<double>& w, std::size_t lo, std::size_t hi, long step) {
    for (std::size_t i = lo; i <= hi; ++i)
        if (!std::isfinite(w[i])) throw NumericError("non-finite solution value", step);
}

}  // namespace

std::vector<double> default_output_times(double horizon, std::size_t tail_points) {
    if (!(horizon > 0.0)) throw ConfigError("horizon must be positive");
    std::vector<double> t;
    for (int k = 6; k >= 0; --k) t.push_back(horizon * std::ldexp(1.0, -k));
    const std::size_t m = std::max<std::size_t>(tail_points, 3);
    for (std::size_t j = 0; j < m; ++j)
        t.push_back(0.5 * horizon + 0.5 * horizon * static_cast<double>(j) / static_cast<double>(m - 1));
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end(), [&](double x, double y) { return std::abs(x - y) <= 1e-12 * horizon; }),
            t.end());
    return t;
}

double slope_cap(const ham::HamiltonianSpec& G, double beta, double theta) {
    const double level = ham::eval(G, theta) + std::max(beta, 0.0);
    double r = std::abs(theta);
    for (const auto& g : G.pieces) {
        const auto roots = ham::level_roots(g, level, 0.0);
        if (roots.b_minus) r = std::max(r, std::abs(g.well + *roots.b_minus));
        if (roots.b_plus) r = std::max(r, std::abs(g.well - *roots.b_plus));
    }
    return 1.25 * r + 0.25;
}

double required_half_width(const ham::HamiltonianSpec& G, double beta, double theta, const SolverConfig& cfg,
                           double a_max) {
    const double cap = cfg.lipschitz_cap > 0.0 ? cfg.lipschitz_cap : slope_cap(G, beta, theta);
    const double alpha =
        cfg.lf_dissipation > 0.0 ? cfg.lf_dissipation : std::max(1e-3, 1.1 * ham::max_abs_derivative(G, -cap, cap));
    return reach(alpha, a_max, cfg.horizon, cfg.domain_margin);
}

StepParams resolve(const env::Environment& e, const ham::HamiltonianSpec& G, double beta, double theta,
                   const SolverConfig& cfg) {
    check_grid(e, cfg);
    StepParams p;
    p.cap = cfg.lipschitz_cap > 0.0 ? cfg.lipschitz_cap : slope_cap(G, beta, theta);
    const double lip = ham::max_abs_derivative(G, -p.cap, p.cap);
    if (cfg.lf_dissipation > 0.0) {
        if (cfg.lf_dissipation < lip)
            throw ConfigError("lf_dissipation " + num(cfg.lf_dissipation) + " is below Lip(G) = " + num(lip) +
                              " on the slope range; the scheme would not be monotone");
        p.alpha = cfg.lf_dissipation;
    } else {
        p.alpha = std::max(1e-3, 1.1 * lip);
    }
    const double a_max = max_of(e.a_values);
    p.dt_max = 1.0 / (2.0 * a_max / (cfg.dx * cfg.dx) + p.alpha / cfg.dx);
    if (cfg.dt > 0.0) {
        if (cfg.dt > p.dt_max * (1.0 + 1e-12))
            throw ConfigError("CFL condition violated: dt = " + num(cfg.dt) + " exceeds the monotone limit " +
                              num(p.dt_max));
        p.dt = cfg.dt;
    } else {
        p.dt = cfg.cfl_safety * p.dt_max;
    }
    p.speed = p.alpha;
    p.half_width = reach(p.alpha, a_max, cfg.horizon, cfg.domain_margin);
    return p;
}

ParabolicState initial_state(const env::Environment& e, double theta, std::size_t first, std::size_t last) {
    if (first > last || last >= e.size()) throw DomainError("state range outside the environment");
    ParabolicState s;
    s.theta = theta;
    s.first = first;
    s.u.resize(last - first + 1);
    for (std::size_t i = 0; i < s.u.size(); ++i) s.u[i] = theta * e.x(first + i);
    return s;
}

void step_inplace(ParabolicState& s, const env::Environment& e, const ham::HamiltonianSpec& G, double beta,
                  double alpha, double dt) {
    if (s.u.empty()) throw DomainError("empty state");
    if (s.first + s.u.size() > e.size()) throw DomainError("state range outside the environment");
    const detail::FastG g(G);
    const std::size_t n = s.u.size();
    std::vector<double> w(n), out(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = s.u[i] - s.theta * e.x(s.first + i);
    const Kernel k{g, e.a_values.data() + s.first, e.v_values.data() + s.first, beta, s.theta, e.dx, alpha, dt};
    s.max_slope = std::max(s.max_slope, k.run(w, out, 0, n - 1));
    check_finite(out, 0, n - 1, s.steps + 1);
    s.min_w = std::numeric_limits<double>::infinity();
    s.max_w = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        s.u[i] = s.theta * e.x(s.first + i) + out[i];
        s.min_w = std::min(s.min_w, out[i]);
        s.max_w = std::max(s.max_w, out[i]);
    }
    s.t += dt;
    ++s.steps;
}

ParabolicState step(const ParabolicState& state, const env::Environment& e, const ham::HamiltonianSpec& G,
                    double beta, const SolverConfig& cfg) {
    const auto p = resolve(e, G, beta, state.theta, cfg);
    ParabolicState next = state;
    step_inplace(next, e, G, beta, p.alpha, p.dt);
    return next;
}

ParabolicResult solve_linear_data(const env::Environment& e, const ham::HamiltonianSpec& G, double beta,
                                  double theta, const SolverConfig& cfg) {
    auto p = resolve(e, G, beta, theta, cfg);
    if (!(cfg.horizon > 0.0)) throw ConfigError("horizon must be positive");
    auto times = cfg.output_times.empty() ? default_output_times(cfg.horizon, cfg.tail_points) : cfg.output_times;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (!(times[k] > 0.0) || times[k] > cfg.horizon * (1.0 + 1e-12))
            throw ConfigError("output times must lie in (0, horizon]");
        if (k > 0 && !(times[k] > times[k - 1])) throw ConfigError("output times must increase strictly");
    }
    const auto [first, last] = window(e, p.half_width);
    const std::size_t n = last - first + 1;
    const std::size_t o = origin_or_throw(e) - first;
    const double avail = std::min(e.x(o + first) - e.x(0), e.x(e.size() - 1) - e.x(o + first));

    const detail::FastG g(G);
    std::vector<double> w(n, 0.0), out(n, 0.0);
    ParabolicResult res;
    res.diag.cap = p.cap;
    res.diag.alpha = p.alpha;
    res.diag.dt = p.dt;
    res.diag.half_width = p.half_width;

    const bool auto_alpha = cfg.lf_dissipation <= 0.0;
    const double a_max = max_of(e.a_values);
    double t = 0.0;
    long steps = 0;
    std::size_t lo = 0, hi = n - 1;
    for (double t_out : times) {
        while (t < t_out) {
            double dt = p.dt;
            if (t + dt >= t_out - 1e-9 * p.dt) dt = t_out - t;
            if (cfg.light_cone) {
                const double r = reach(p.speed, a_max, cfg.horizon - t, cfg.domain_margin);
                const auto m = std::min<std::size_t>(o, static_cast<std::size_t>(std::ceil(r / e.dx)));
                lo = o - m;
                hi = std::min(n - 1, o + m);
            }
            const Kernel k{g, e.a_values.data() + first, e.v_values.data() + first, beta, theta, e.dx, p.alpha, dt};
            const double smax = k.run(w, out, lo, hi);
            if (smax > p.cap) {
                // the monotonicity bound no longer covers the slopes in use:
                // widen the cap and redo the step
                if (!auto_alpha)
                    throw NumericError("discrete slope " + num(smax) + " exceeds the Lipschitz cap " + num(p.cap) +
                                           " with fixed lf_dissipation",
                                       steps + 1);
                p.cap = 1.25 * smax;
                p.alpha = 1.1 * ham::max_abs_derivative(G, -p.cap, p.cap);
                p.dt_max = 1.0 / (2.0 * a_max / (e.dx * e.dx) + p.alpha / e.dx);
                p.dt = cfg.dt > 0.0 ? std::min(cfg.dt, cfg.cfl_safety * p.dt_max) : cfg.cfl_safety * p.dt_max;
                p.speed = p.alpha;
                if (reach(p.alpha, a_max, cfg.horizon - t, cfg.domain_margin) > avail)
                    throw NumericError("slope cap raised beyond what the sampled domain supports", steps + 1);
                ++res.diag.cap_increases;
                continue;
            }
            res.diag.max_slope = std::max(res.diag.max_slope, smax);
            check_finite(out, lo, hi, steps + 1);
            for (std::size_t i = lo; i <= hi; ++i) w[i] = out[i];
            t += dt;
            ++steps;
        }
        t = t_out;
        res.times.push_back(t_out);
        res.u_origin.push_back(w[o]);
    }
    res.diag.steps = steps;
    res.diag.cap = p.cap;
    res.diag.alpha = p.alpha;

    auto& s = res.final_state;
    s.t = t;
    s.theta = theta;
    s.first = first;
    s.steps = steps;
    s.max_slope = res.diag.max_slope;
    s.u.resize(n);
    s.min_w = std::numeric_limits<double>::infinity();
    s.max_w = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        s.u[i] = theta * e.x(first + i) + w[i];
        if (i >= lo && i <= hi) {
            s.min_w = std::min(s.min_w, w[i]);
            s.max_w = std::max(s.max_w, w[i]);
        }
    }
    return res;
}

// ---------------------------------------------------------------------------

double DiscountedState::value_at_origin() const {
    const auto k = static_cast<std::size_t>(std::llround(-x_first / dx));
    return v.at(k);
}

double discounted_half_width(const ham::HamiltonianSpec& G, double beta, double theta, double discount,
                             const SolverConfig& cfg, double a_max) {
    if (!(discount > 0.0)) throw ParameterError("discount must be positive");
    const double cap = cfg.lipschitz_cap > 0.0 ? cfg.lipschitz_cap : slope_cap(G, beta, theta);
    const double alpha =
        cfg.lf_dissipation > 0.0 ? cfg.lf_dissipation : std::max(1e-3, 1.1 * ham::max_abs_derivative(G, -cap, cap));
    return cfg.domain_margin + cfg.width_factor * (alpha + std::sqrt(a_max * discount)) / discount;
}

DiscountedState solve_discounted(const env::Environment& e, const ham::HamiltonianSpec& G, double beta,
                                 double theta, double discount, const SolverConfig& cfg,
                                 const std::vector<double>* warm, double half_width) {
    if (!(discount > 0.0)) throw ParameterError("discount must be positive");
    auto p = resolve(e, G, beta, theta, cfg);
    const double a_max = max_of(e.a_values);
    const double width = half_width > 0.0 ? half_width : discounted_half_width(G, beta, theta, discount, cfg, a_max);
    const auto [first, last] = window(e, width);
    const std::size_t n = last - first + 1;
    const double* a = e.a_values.data() + first;
    const double* V = e.v_values.data() + first;
    const double dx = e.dx, idx = 1.0 / dx, idx2 = idx * idx;
    const detail::FastG g(G);
    const bool auto_alpha = cfg.lf_dissipation <= 0.0;

    DiscountedState st;
    st.discount = discount;
    st.theta = theta;
    st.first = first;
    st.x_first = e.x(first);
    st.dx = dx;
    double vmin = 1.0, vmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        vmin = std::min(vmin, V[i]);
        vmax = std::max(vmax, V[i]);
    }
    const double g_theta = ham::eval(G, theta);
    st.lower_bound = g_theta + beta * vmin;
    st.upper_bound = g_theta + beta * vmax;
    if (warm) {
        if (warm->size() != n) throw ParameterError("warm start has the wrong size");
        st.v = *warm;
    } else {
        st.v.assign(n, 0.5 * (st.lower_bound + st.upper_bound) / discount);
    }

    std::vector<double> F(n), lo_c(n), up_c(n), diag(n), rhs(n), cp(n);
    auto& v = st.v;
    const double tol = cfg.solve_tol * std::max(1.0, std::abs(g_theta) + beta);
    double ds = 10.0 * p.dt_max;
    double res_prev = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it <= cfg.max_iterations; ++it) {
        double res = 0.0, smax = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double vc = v[i];
            const double vm = i > 0 ? v[i - 1] : vc;
            const double vp = i + 1 < n ? v[i + 1] : vc;
            const double lap = vp - 2.0 * vc + vm;
            const double avg = theta + 0.5 * (vp - vm) * idx;
            smax = std::max(smax, std::abs(avg));
            double dg = 0.0;
            const double gv = g.eval_deriv(avg, dg);
            F[i] = -discount * vc + a[i] * lap * idx2 + gv + 0.5 * p.alpha * lap * idx + beta * V[i];
            res = std::max(res, std::abs(F[i]));
            up_c[i] = i + 1 < n ? a[i] * idx2 + 0.5 * (dg + p.alpha) * idx : 0.0;
            lo_c[i] = i > 0 ? a[i] * idx2 + 0.5 * (p.alpha - dg) * idx : 0.0;
        }
        if (smax > p.cap) {
            if (!auto_alpha)
                throw NumericError("discrete slope exceeds the Lipschitz cap with fixed lf_dissipation",
                                   static_cast<long>(it));
            p.cap = 1.25 * smax;
            p.alpha = 1.1 * ham::max_abs_derivative(G, -p.cap, p.cap);
            p.dt_max = 1.0 / (2.0 * a_max * idx2 + p.alpha * idx);
            res_prev = std::numeric_limits<double>::infinity();
            ds = 10.0 * p.dt_max;
            continue;
        }
        if (!std::isfinite(res)) throw NumericError("non-finite discounted residual", static_cast<long>(it));
        st.residual_history.push_back(res);
        st.residual = res;
        st.iterations = it;
        if (res <= tol) break;
        if (it == cfg.max_iterations) break;
        // grow the pseudo-time step on every decrease, cut it on an increase
        if (res_prev < std::numeric_limits<double>::infinity())
            ds *= res < res_prev ? std::clamp(res_prev / res, 1.5, 10.0) : std::max(0.25, res_prev / res);
        ds = std::min(ds, 1e14);
        res_prev = res;
        // (1/ds - J) delta = F, Thomas algorithm; -J is an M-matrix
        const double inv = 1.0 / ds;
        for (std::size_t i = 0; i < n; ++i) diag[i] = inv + discount + up_c[i] + lo_c[i];
        cp[0] = -up_c[0] / diag[0];
        rhs[0] = F[0] / diag[0];
        for (std::size_t i = 1; i < n; ++i) {
            const double m = diag[i] + lo_c[i] * cp[i - 1];
            cp[i] = -up_c[i] / m;
            rhs[i] = (F[i] + lo_c[i] * rhs[i - 1]) / m;
        }
        for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= cp[i] * rhs[i + 1];
        for (std::size_t i = 0; i < n; ++i) v[i] += rhs[i];
    }
    st.alpha = p.alpha;
    if (st.residual > tol) {
        std::string hist;
        const std::size_t k0 = st.residual_history.size() > 5 ? st.residual_history.size() - 5 : 0;
        for (std::size_t k = k0; k < st.residual_history.size(); ++k) hist += " " + num(st.residual_history[k]);
        throw IterationError("discounted solve did not converge (discount " + num(discount) +
                             ", residual history:" + hist + ")");
    }
    double sup = 0.0, inf = std::numeric_limits<double>::infinity();
    for (double x : v) {
        sup = std::max(sup, discount * x);
        inf = std::min(inf, discount * x);
    }
    const double slack = 10.0 * tol;
    st.sup_bound_ok = sup <= st.upper_bound + slack && inf >= st.lower_bound - slack;
    return st;
}

CorrectorProfile corrector_profile(const env::Environment& e, const ham::HamiltonianSpec& G, double beta,
                                   double theta, const SolverConfig& cfg, std::span<const double> discounts) {
    if (discounts.empty()) throw ParameterError("corrector_profile needs at least one discount");
    for (std::size_t k = 0; k < discounts.size(); ++k) {
        if (!(discounts[k] > 0.0)) throw ParameterError("discounts must be positive");
        if (k > 0 && !(discounts[k] < discounts[k - 1])) throw ParameterError("discounts must decrease strictly");
    }
    const double a_max = max_of(e.a_values);
    const double width = discounted_half_width(G, beta, theta, discounts.back(), cfg, a_max);

    CorrectorProfile prof;
    prof.theta = theta;
    prof.half_width = width;
    std::vector<double> v;
    DiscountedState last;
    for (std::size_t k = 0; k < discounts.size(); ++k) {
        std::vector<double> seed;
        if (k > 0) {
            const double v0 = last.value_at_origin();
            seed = last.v;
            for (double& x : seed) x += -v0 + discounts[k - 1] * v0 / discounts[k];
        }
        last = solve_discounted(e, G, beta, theta, discounts[k], cfg, k > 0 ? &seed : nullptr, width);
        prof.discounts.push_back(discounts[k]);
        prof.discounted_values.push_back(discounts[k] * last.value_at_origin());
        prof.residuals.push_back(last.residual);
    }
    prof.lambda_est = prof.discounted_values.back();
    prof.lambda_limit = prof.lambda_est;
    if (const std::size_t k = prof.discounts.size(); k >= 2) {
        const double d1 = prof.discounts[k - 2], d2 = prof.discounts[k - 1];
        const double y1 = prof.discounted_values[k - 2], y2 = prof.discounted_values[k - 1];
        prof.lambda_limit = y2 - d2 * (y1 - y2) / (d1 - d2);
    }
    const double v0 = last.value_at_origin();
    const std::size_t n = last.v.size();
    const std::size_t centre = (n - 1) / 2;
    const std::size_t q = centre / 2;
    for (std::size_t i = centre - q; i <= centre + q; ++i) {
        if (i == 0 || i + 1 >= n) continue;
        prof.x.push_back(last.x_first + static_cast<double>(i) * last.dx);
        prof.F.push_back(last.v[i] - v0);
        prof.grad.push_back((last.v[i + 1] - last.v[i - 1]) / (2.0 * last.dx));
    }
    return prof;
}

}  // namespace vhj::pde
