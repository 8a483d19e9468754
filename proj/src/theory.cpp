#include "vhj/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <tuple>

#include "vhj/errors.hpp"

namespace vhj::theory {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

double curve_at(const homog::EffectiveCurve& c, double theta, const char* which) {
    const auto& g = c.theta_grid;
    if (g.empty()) throw ParameterError(std::string(which) + " curve is empty");
    const double eps = 1e-9 * std::max(1.0, std::abs(theta));
    if (theta < g.front() - eps || theta > g.back() + eps)
        throw ParameterError(std::string(which) + " curve does not cover theta = " + num(theta));
    return homog::interpolate(c, theta);
}

bool same_grid(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i] - b[i]) > 1e-12 * std::max(1.0, std::abs(a[i]))) return false;
    return true;
}

// Per-node integrand f = 1/(a v delta); it is linear on each cell, so the
// scaled coordinate is quadratic there.
std::vector<double> integrand(const env::Environment& e, double delta) {
    std::vector<double> f(e.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1.0 / std::max(e.a_values[i], delta);
    return f;
}

struct ScaledCoordinate {
    std::vector<double> f;    // chi'
    std::vector<double> chi;  // int_{x0}^{x_i} f
    std::vector<double> mid;  // chi at cell midpoints
    std::size_t cell0 = 0;    // cell holding x0
    double s0 = 0.0;          // offset of x0 inside it
};

ScaledCoordinate scaled_coordinate(const env::Environment& e, double x0, double delta) {
    ScaledCoordinate sc;
    sc.f = integrand(e, delta);
    const auto cum = env::cumulative_scaled_length(e, delta);
    const double at_x0 = x0 > e.x(0) ? env::scaled_length(e, e.x(0), x0, delta) : 0.0;
    sc.chi.resize(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) sc.chi[i] = cum[i] - at_x0;
    sc.mid.resize(e.size() - 1);
    for (std::size_t i = 0; i + 1 < e.size(); ++i)
        sc.mid[i] = sc.chi[i] + e.dx * (3.0 * sc.f[i] + sc.f[i + 1]) / 8.0;
    const double r = (x0 - e.x(0)) / e.dx;
    sc.cell0 = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(r))), e.size() - 2);
    sc.s0 = x0 - e.x(sc.cell0);
    return sc;
}

// chi at offset s inside cell j.
double chi_in_cell(const ScaledCoordinate& sc, std::size_t j, double s, double dx) {
    return sc.chi[j] + sc.f[j] * s + (sc.f[j + 1] - sc.f[j]) * s * s / (2.0 * dx);
}

// Node values of int_{x0}^{x_i} phi(chi(r)) dr by Simpson's rule per cell.
template <class Phi>
std::vector<double> integrate_from_x0(const env::Environment& e, const ScaledCoordinate& sc, Phi phi) {
    const std::size_t n = e.size();
    const double dx = e.dx;
    std::vector<double> I(n, 0.0);
    for (std::size_t i = 1; i < n; ++i)
        I[i] = I[i - 1] + dx / 6.0 * (phi(sc.chi[i - 1]) + 4.0 * phi(sc.mid[i - 1]) + phi(sc.chi[i]));
    const std::size_t j = sc.cell0;
    const double s = sc.s0;
    const double part =
        s / 6.0 * (phi(sc.chi[j]) + 4.0 * phi(chi_in_cell(sc, j, 0.5 * s, dx)) + phi(chi_in_cell(sc, j, s, dx)));
    const double at_x0 = I[j] + part;
    for (auto& v : I) v -= at_x0;
    return I;
}

// Value of the same integral at an arbitrary point x.
template <class Phi>
double integral_at(const env::Environment& e, const ScaledCoordinate& sc, const std::vector<double>& I, Phi phi,
                   double x) {
    const double dx = e.dx;
    const double r = (x - e.x(0)) / dx;
    const std::size_t j = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(r))), e.size() - 2);
    const double s = x - e.x(j);
    return I[j] +
           s / 6.0 * (phi(sc.chi[j]) + 4.0 * phi(chi_in_cell(sc, j, 0.5 * s, dx)) + phi(chi_in_cell(sc, j, s, dx)));
}

double alpha_for(const ham::HamiltonianSpec& G, double beta, double theta, double slope_bound) {
    const double m = std::max(slope_bound, pde::slope_cap(G, beta, theta));
    return std::max(1e-3, 1.1 * ham::max_abs_derivative(G, -m, m));
}

// Discrete residual a D2 + G_hat + beta V - rate at interior nodes; returns
// the worst value in the direction that breaks the barrier property.
double worst_residual(const env::Environment& e, const ham::HamiltonianSpec& G, double beta,
                      const BarrierFunction& b, bool sub) {
    const double dx = e.dx, idx = 1.0 / dx, idx2 = idx * idx;
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < e.size(); ++i) {
        const double lap = b.value0[i + 1] - 2.0 * b.value0[i] + b.value0[i - 1];
        const double avg = 0.5 * (b.value0[i + 1] - b.value0[i - 1]) * idx;
        const double r = e.a_values[i] * lap * idx2 + ham::eval(G, avg) + 0.5 * b.alpha * lap * idx +
                         beta * e.v_values[i] - b.rate;
        worst = sub ? std::max(worst, -r) : std::max(worst, r);
    }
    return worst;
}

void finish_validation(const env::Environment& e, const ham::HamiltonianSpec& G, double beta, BarrierFunction& b,
                       bool sub) {
    double m2 = 0.0;
    for (double d : b.d2) m2 = std::max(m2, std::abs(d));
    b.slack = e.dx * (1.0 + b.alpha * m2);
    b.max_violation = worst_residual(e, G, beta, b, sub);
    b.residual_ok = b.max_violation <= b.slack;
    b.initial_ok = true;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double lin = b.theta * e.x(i);
        const double tol = 1e-10 * std::max(1.0, std::abs(lin));
        if (sub ? b.value0[i] > lin + tol : b.value0[i] < lin - tol) b.initial_ok = false;
    }
}

double x0_for(const env::Environment& e, const env::HillValleyWitness& w) {
    if (!(w.y > 0.0)) throw ParameterError("witness y must be positive");
    if (w.l1 < e.x(0) || w.l2 > e.x(e.size() - 1)) throw DomainError("witness lies outside the environment");
    return env::invert_scaled_length(e, w.l1, w.y, w.delta);
}

}  // namespace

const char* to_string(Regime r) { return r == Regime::StrongPotential ? "strong" : "weak"; }

const char* to_string(BarrierKind k) { return k == BarrierKind::ChiSubsolution ? "chi_subsolution" : "s_supersolution"; }

TheoremPrediction predict_two_well(const homog::EffectiveCurve& curve_minus, const homog::EffectiveCurve& curve_plus,
                                   double c_minus, double c_plus, double p_hat, double beta, double gc_at_phat,
                                   std::span<const double> grid, double tol) {
    if (!(c_minus < c_plus)) throw ParameterError("predict_two_well needs c_minus < c_plus");
    if (p_hat < c_minus || p_hat > c_plus) throw ParameterError("p_hat must lie between the wells");
    TheoremPrediction out;
    if (grid.empty()) out.theta_grid = curve_minus.theta_grid;
    else out.theta_grid.assign(grid.begin(), grid.end());
    out.curve_minus_id = curve_minus.spec_id;
    out.curve_plus_id = curve_plus.spec_id;
    if (beta >= gc_at_phat) {
        out.regime = Regime::StrongPotential;
        out.flat_level = beta;
        out.theta_minus = c_minus;
        out.theta_plus = c_plus;
    } else {
        out.regime = Regime::WeakPotential;
        out.flat_level = gc_at_phat;
        const auto fe = homog::flat_endpoints(curve_minus, curve_plus, gc_at_phat, p_hat, c_minus, c_plus, tol);
        out.theta_minus = fe.theta_minus;
        out.theta_plus = fe.theta_plus;
        out.minus_at_edge = fe.minus_at_edge;
        out.plus_at_edge = fe.plus_at_edge;
    }
    for (double th : out.theta_grid) {
        if (th < out.theta_minus) out.predicted.push_back(curve_at(curve_minus, th, "minus"));
        else if (th > out.theta_plus) out.predicted.push_back(curve_at(curve_plus, th, "plus"));
        else out.predicted.push_back(out.flat_level);
    }
    return out;
}

MultiwellPrediction predict_multiwell(std::span<const TheoremPrediction> pairwise, std::span<const double> wells,
                                      double tol) {
    if (pairwise.empty()) throw ParameterError("predict_multiwell needs at least one pair");
    if (wells.size() != pairwise.size() + 1)
        throw ParameterError("expected " + std::to_string(pairwise.size() + 1) + " wells, got " +
                             std::to_string(wells.size()));
    for (std::size_t i = 1; i < wells.size(); ++i)
        if (!(wells[i] > wells[i - 1])) throw ParameterError("wells must increase strictly");
    for (const auto& p : pairwise)
        if (!same_grid(p.theta_grid, pairwise.front().theta_grid) || p.predicted.size() != p.theta_grid.size())
            throw ParameterError("pairwise predictions must share one theta grid");
    MultiwellPrediction out;
    out.theta_grid = pairwise.front().theta_grid;
    const std::size_t n = pairwise.size();
    for (std::size_t k = 0; k < out.theta_grid.size(); ++k) {
        const double th = out.theta_grid[k];
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : pairwise) m = std::min(m, p.predicted[k]);
        out.predicted.push_back(m);
        // pair i covers (c_i, c_{i+1}]; the first and last pairs extend outward
        std::size_t i = 0;
        while (i + 1 < n && th > wells[i + 1]) ++i;
        out.piecewise.push_back(pairwise[i].predicted[k]);
        out.max_disagreement = std::max(out.max_disagreement, std::abs(m - out.piecewise.back()));
    }
    out.agree = out.max_disagreement <= tol;
    return out;
}

CommuteReport check_commute(const homog::EffectiveCurve& curve_minus, const homog::EffectiveCurve& curve_plus,
                            const homog::EffectiveCurve& curve_conv, double beta, double c_minus, double c_plus) {
    if (!same_grid(curve_minus.theta_grid, curve_plus.theta_grid) ||
        !same_grid(curve_minus.theta_grid, curve_conv.theta_grid))
        throw ParameterError("check_commute needs curves on one theta grid");
    CommuteReport r;
    r.theta_grid = curve_conv.theta_grid;
    r.conv_curve = curve_conv.values();
    const auto vm = curve_minus.values();
    const auto vp = curve_plus.values();
    std::vector<double> mn(vm.size());
    for (std::size_t i = 0; i < mn.size(); ++i) mn[i] = std::min(vm[i], vp[i]);
    r.envelope = mn.size() >= 2 ? ham::convex_envelope(r.theta_grid, mn) : mn;
    for (std::size_t i = 0; i < r.theta_grid.size(); ++i) {
        const double th = r.theta_grid[i];
        r.three_piece.push_back(th < c_minus ? vm[i] : th > c_plus ? vp[i] : beta);
        r.max_deviation = std::max(r.max_deviation, std::abs(r.envelope[i] - r.conv_curve[i]));
        r.form_deviation = std::max(r.form_deviation, std::abs(r.three_piece[i] - r.conv_curve[i]));
    }
    return r;
}

namespace {

std::pair<double, double> gradient_band(const ham::ConvexPiece& g, double theta, double beta, double lambda) {
    if (!(lambda > beta))
        throw PreconditionError("gradient bands need lambda > beta (lambda = " + num(lambda) + ", beta = " + num(beta) +
                                ")");
    const auto roots = ham::level_roots(g, lambda, beta);
    if (theta > g.well) {
        if (!roots.a_minus || !roots.b_minus) throw PreconditionError("level roots missing on the right branch");
        return {g.well + *roots.a_minus, g.well + *roots.b_minus};
    }
    if (!roots.a_plus || !roots.b_plus) throw PreconditionError("level roots missing on the left branch");
    return {g.well - *roots.b_plus, g.well - *roots.a_plus};
}

void tally(CorrectorBandReport& r, double q, double lo, double hi, const std::optional<PHatCheck>& phat,
           std::size_t& phat_ok) {
    ++r.nodes;
    const double excess = std::max(lo - q, q - hi);
    r.worst_excess = std::max(r.worst_excess, excess);
    if (excess <= r.slack) ++r.inside;
    if (phat) {
        const bool ok = phat->side == PHatSide::Below ? q <= phat->p_hat + r.slack : q >= phat->p_hat - r.slack;
        if (ok) ++phat_ok;
    }
}

void finish(CorrectorBandReport& r, const std::optional<PHatCheck>& phat, std::size_t phat_ok) {
    r.fraction = r.nodes ? static_cast<double>(r.inside) / static_cast<double>(r.nodes) : 0.0;
    if (phat) r.phat_fraction = r.nodes ? static_cast<double>(phat_ok) / static_cast<double>(r.nodes) : 0.0;
}

}  // namespace

CorrectorBandReport check_corrector_bounds(std::span<const double> grad, const ham::ConvexPiece& g, double theta,
                                           double beta, double lambda_est, double slack,
                                           std::optional<PHatCheck> phat) {
    if (theta == g.well) throw PreconditionError("gradient bands need theta away from the well");
    CorrectorBandReport r;
    r.theta = theta;
    r.lambda = lambda_est;
    r.slack = slack;
    r.degenerate = beta == 0.0;
    std::tie(r.band_lo, r.band_hi) = gradient_band(g, theta, beta, lambda_est);
    std::size_t phat_ok = 0;
    for (double d : grad) tally(r, theta + d, r.band_lo, r.band_hi, phat, phat_ok);
    finish(r, phat, phat_ok);
    return r;
}

CorrectorBandReport check_discounted_bounds(const pde::CorrectorProfile& p, const ham::ConvexPiece& g, double beta,
                                            double slack, std::optional<PHatCheck> phat) {
    if (p.discounts.empty() || p.grad.size() != p.F.size()) throw PreconditionError("corrector profile is empty");
    if (p.theta == g.well) throw PreconditionError("gradient bands need theta away from the well");
    const double d = *std::min_element(p.discounts.begin(), p.discounts.end());
    CorrectorBandReport r;
    r.theta = p.theta;
    r.lambda = p.lambda_est;
    r.slack = slack;
    r.degenerate = beta == 0.0;
    r.band_lo = r.band_hi = std::numeric_limits<double>::quiet_NaN();
    if (p.lambda_est > beta) std::tie(r.band_lo, r.band_hi) = gradient_band(g, p.theta, beta, p.lambda_est);
    std::size_t phat_ok = 0;
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
        const double level = p.lambda_est + d * p.F[i];
        if (!(level > beta)) {
            // no band at this node; it counts as outside
            ++r.nodes;
            continue;
        }
        const auto [lo, hi] = gradient_band(g, p.theta, beta, level);
        tally(r, p.theta + p.grad[i], lo, hi, phat, phat_ok);
    }
    finish(r, phat, phat_ok);
    return r;
}

BarrierFunction build_chi_subsolution(const env::Environment& e, const env::HillValleyWitness& witness, double theta,
                                      const ham::HamiltonianSpec& G, double beta, double eps) {
    if (witness.kind != env::WitnessKind::Hill) throw ParameterError("chi subsolution needs a hill witness");
    if (!(eps >= 0.0)) throw ParameterError("eps must be nonnegative");
    if (e.size() < 3) throw DomainError("environment too small for a barrier");
    BarrierFunction b;
    b.kind = BarrierKind::ChiSubsolution;
    b.witness = witness;
    b.theta = theta;
    b.eps = eps;
    b.h = witness.h;
    b.y = witness.y;
    b.delta = witness.delta;
    b.x0 = x0_for(e, witness);
    b.rate = beta * b.h - eps;

    const auto sc = scaled_coordinate(e, b.x0, b.delta);
    const auto I = integrate_from_x0(e, sc, [](double c) { return c; });
    double pmax = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        b.x.push_back(e.x(i));
        b.value0.push_back(theta * e.x(i) - eps * I[i]);
        b.d1.push_back(theta - eps * sc.chi[i]);
        b.d2.push_back(-eps * sc.f[i]);
        pmax = std::max(pmax, std::abs(sc.chi[i]));
    }
    // G(theta + eps p) >= beta h for |p| >= y, over the range of p on the grid
    if (eps > 0.0 && pmax > b.y) {
        const int m = 2001;
        for (int j = 0; j < m; ++j) {
            const double p = b.y + (pmax - b.y) * j / (m - 1);
            for (double sgn : {1.0, -1.0})
                if (ham::eval(G, theta + sgn * eps * p) < beta * b.h - 1e-12)
                    throw ParameterError("G(theta + eps p) < beta h at |p| = " + num(p) +
                                         "; y is too small for this eps");
        }
    }
    double m1 = 0.0;
    for (double d : b.d1) m1 = std::max(m1, std::abs(d));
    b.alpha = alpha_for(G, beta, theta, m1);
    finish_validation(e, G, beta, b, true);
    return b;
}

BarrierFunction build_s_supersolution(const env::Environment& e, const env::HillValleyWitness& witness, double theta,
                                      double c, const ham::HamiltonianSpec& G, double beta) {
    if (witness.kind != env::WitnessKind::Valley) throw ParameterError("s supersolution needs a valley witness");
    if (!(c > 0.0)) throw ParameterError("c must be positive");
    if (std::abs(theta) > c) throw ParameterError("s supersolution needs |theta| <= c");
    if (std::abs(ham::eval(G, c)) > 1e-9 || std::abs(ham::eval(G, -c)) > 1e-9)
        throw ParameterError("s supersolution needs G(-c) = G(c) = 0");
    if (e.size() < 3) throw DomainError("environment too small for a barrier");
    BarrierFunction b;
    b.kind = BarrierKind::SSupersolution;
    b.witness = witness;
    b.theta = theta;
    b.c = c;
    b.h = witness.h;
    b.y = witness.y;
    b.delta = witness.delta;
    b.x0 = x0_for(e, witness);

    double gmax = 0.0;
    for (int j = 0; j <= 2000; ++j) gmax = std::max(gmax, ham::eval(G, -c + 2.0 * c * j / 2000.0));
    const double eta = std::max(beta, gmax);
    b.rate = eta + 1.5 * c / b.y + beta * b.h;

    const double y = b.y;
    auto s_of = [c, y](double chi) {
        const double xi = std::clamp(chi / y, -1.0, 1.0);
        return 0.5 * c * xi * (3.0 - xi * xi);
    };
    const auto sc = scaled_coordinate(e, b.x0, b.delta);
    const auto S = integrate_from_x0(e, sc, s_of);

    // shift so that w(0, x) - theta x = int_{x0}^x (s - theta) - min >= 0
    double mn = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < e.size(); ++i)
        if (e.x(i) >= witness.l1 && e.x(i) <= witness.l2) mn = std::min(mn, S[i] - theta * (e.x(i) - b.x0));
    for (double xe : {witness.l1, witness.l2})
        mn = std::min(mn, integral_at(e, sc, S, s_of, xe) - theta * (xe - b.x0));
    b.k = theta * b.x0 - mn;

    double m1 = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double xi = sc.chi[i] / y;
        b.x.push_back(e.x(i));
        b.value0.push_back(b.k + S[i]);
        b.d1.push_back(s_of(sc.chi[i]));
        b.d2.push_back(std::abs(xi) < 1.0 ? 1.5 * c / y * sc.f[i] * (1.0 - xi * xi) : 0.0);
        m1 = std::max(m1, std::abs(b.d1.back()));
    }
    b.alpha = alpha_for(G, beta, theta, m1);
    finish_validation(e, G, beta, b, false);
    return b;
}

ComparisonReport check_barrier_comparison(const env::Environment& e, const ham::HamiltonianSpec& G, double beta,
                                          double theta, const BarrierFunction* lower, const BarrierFunction* upper,
                                          long steps, double cfl_safety) {
    const std::size_t n = e.size();
    for (const auto* b : {lower, upper})
        if (b && b->value0.size() != n) throw ParameterError("barrier does not match the environment grid");
    ComparisonReport r;
    r.alpha = alpha_for(G, beta, theta, 0.0);
    if (lower) r.alpha = std::max(r.alpha, lower->alpha);
    if (upper) r.alpha = std::max(r.alpha, upper->alpha);
    const double a_max = *std::max_element(e.a_values.begin(), e.a_values.end());
    r.dt = cfl_safety / (2.0 * a_max / (e.dx * e.dx) + r.alpha / e.dx);
    const double lo_viol = lower ? std::max(0.0, lower->max_violation) : 0.0;
    const double hi_viol = upper ? std::max(0.0, upper->max_violation) : 0.0;

    auto s = pde::initial_state(e, theta, 0, n - 1);
    for (long k = 1; k <= steps; ++k) {
        pde::step_inplace(s, e, G, beta, r.alpha, r.dt);
        ++r.steps;
        const double t = static_cast<double>(k) * r.dt;
        const std::size_t reach = static_cast<std::size_t>(k);
        if (2 * reach >= n) break;
        for (std::size_t i = reach; i + reach < n; ++i) {
            const double u = s.u[i];
            const double tol = 1e-9 * std::max(1.0, std::abs(u));
            ++r.checked;
            if (lower) {
                const double gap = u - (lower->value(i, t) - lo_viol * t);
                r.worst_lower = std::min(r.worst_lower, gap);
                if (gap < -tol) ++r.lower_violations;
            }
            if (upper) {
                const double gap = upper->value(i, t) + hi_viol * t - u;
                r.worst_upper = std::min(r.worst_upper, gap);
                if (gap < -tol) ++r.upper_violations;
            }
        }
    }
    return r;
}

}  // namespace vhj::theory
