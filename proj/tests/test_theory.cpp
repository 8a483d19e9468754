#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "vhj/errors.hpp"
#include "vhj/theory.hpp"

using namespace vhj;

namespace {

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = lo + (hi - lo) * k / (n - 1);
    return v;
}

template <class F>
homog::EffectiveCurve synthetic(const std::vector<double>& theta, F f, std::string id = {}) {
    homog::EffectiveCurve c;
    c.theta_grid = theta;
    c.spec_id = std::move(id);
    for (double t : theta) {
        homog::EffectiveEstimate e;
        e.theta = t;
        e.value = f(t);
        c.estimates.push_back(e);
    }
    return c;
}

// Stand-ins for the piece curves: minimum beta at the well, quadratic growth.
homog::EffectiveCurve piece_curve(const std::vector<double>& grid, double well, double beta, std::string id) {
    return synthetic(grid, [=](double t) { return beta + 0.5 * (t - well) * (t - well); }, std::move(id));
}

pde::SolverConfig solver(double dx, double T) {
    pde::SolverConfig c;
    c.dx = dx;
    c.horizon = T;
    return c;
}

env::Environment sample(const env::EnvModel& m, double w, double dx, std::uint64_t seed) {
    const double h = std::ceil(w / dx) * dx;
    return env::sample_environment(m, -h, h, dx, seed);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST_CASE("strong regime prediction is flat at beta between the wells") {
    const auto grid = linspace(-2.5, 2.5, 21);
    const auto cm = piece_curve(grid, -1.0, 1.0, "minus");
    const auto cp = piece_curve(grid, 1.0, 1.0, "plus");
    const auto p = theory::predict_two_well(cm, cp, -1.0, 1.0, 0.0, 1.0, 0.5);
    CHECK(p.regime == theory::Regime::StrongPotential);
    CHECK(p.flat_level == 1.0);
    CHECK(p.theta_minus == -1.0);
    CHECK(p.theta_plus == 1.0);
    CHECK(p.curve_minus_id == "minus");
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        const double want = t < -1.0 ? cm.estimates[k].value : t > 1.0 ? cp.estimates[k].value : 1.0;
        CHECK(p.predicted[k] == doctest::Approx(want).epsilon(1e-12));
    }
    // the strong curve is the convex envelope of the pointwise minimum
    std::vector<double> mn;
    for (std::size_t k = 0; k < grid.size(); ++k) mn.push_back(std::min(cm.estimates[k].value, cp.estimates[k].value));
    CHECK(max_abs_diff(ham::convex_envelope(grid, mn), p.predicted) < 1e-12);
}

TEST_CASE("weak regime prediction sits at G_c(p_hat) on the flat interval") {
    const double beta = 0.2;
    const auto grid = linspace(-2.5, 2.5, 201);
    const auto cm = piece_curve(grid, -1.0, beta, "minus");
    const auto cp = piece_curve(grid, 1.0, beta, "plus");
    const auto p = theory::predict_two_well(cm, cp, -1.0, 1.0, 0.0, beta, 0.5);
    CHECK(p.regime == theory::Regime::WeakPotential);
    CHECK(p.flat_level == 0.5);
    // beta + (theta - 1)^2 / 2 = 1/2
    const double root = 1.0 - std::sqrt(2.0 * (0.5 - beta));
    CHECK(p.theta_plus == doctest::Approx(root).epsilon(1e-3));
    CHECK(p.theta_minus == doctest::Approx(-root).epsilon(1e-3));
    CHECK(p.theta_minus <= 0.0);
    CHECK(p.theta_plus >= 0.0);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        if (grid[k] >= p.theta_minus && grid[k] <= p.theta_plus) CHECK(p.predicted[k] == 0.5);
        if (k > 0) CHECK(std::abs(p.predicted[k] - p.predicted[k - 1]) < 0.05);  // continuous
    }
}

TEST_CASE("both regimes coincide at the boundary level") {
    const auto grid = linspace(-2.5, 2.5, 101);
    const auto cm = piece_curve(grid, -1.0, 0.5, "minus");
    const auto cp = piece_curve(grid, 1.0, 0.5, "plus");
    const auto strong = theory::predict_two_well(cm, cp, -1.0, 1.0, 0.0, 0.5, 0.5);
    CHECK(strong.regime == theory::Regime::StrongPotential);
    const auto fe = homog::flat_endpoints(cm, cp, 0.5, 0.0, -1.0, 1.0);
    CHECK(fe.theta_minus == -1.0);
    CHECK(fe.theta_plus == 1.0);
    CHECK(fe.minus_at_edge);
    CHECK(fe.plus_at_edge);
    for (std::size_t k = 0; k < grid.size(); ++k) {
        const double t = grid[k];
        const double weak = t < fe.theta_minus ? cm.estimates[k].value
                            : t > fe.theta_plus ? cp.estimates[k].value
                                                : 0.5;
        CHECK(strong.predicted[k] == doctest::Approx(weak).epsilon(1e-12));
    }
    CHECK_THROWS_AS(theory::predict_two_well(cm, cp, 1.0, -1.0, 0.0, 0.5, 0.5), ParameterError);
    // weak level above what the curves reach on the bracket
    CHECK_THROWS_AS(theory::predict_two_well(cm, cp, -1.0, 1.0, 0.0, 0.1, 3.0), RootNotBracketedError);
}

TEST_CASE("multiwell prediction from pairwise predictions") {
    const std::vector<double> wells{-2.0, 0.0, 2.0};
    const auto grid = linspace(-3.0, 3.0, 25);
    for (double beta : {1.0, 0.3}) {
        const auto c0 = piece_curve(grid, wells[0], beta, "g0");
        const auto c1 = piece_curve(grid, wells[1], beta, "g1");
        const auto c2 = piece_curve(grid, wells[2], beta, "g2");
        // G_c at the crossing midway between wells 2 apart is (1)^2 / 2 = 1/2
        const std::vector<theory::TheoremPrediction> pairs{
            theory::predict_two_well(c0, c1, wells[0], wells[1], -1.0, beta, 0.5),
            theory::predict_two_well(c1, c2, wells[1], wells[2], 1.0, beta, 0.5)};
        const auto m = theory::predict_multiwell(pairs, wells);
        CHECK(m.agree);
        CHECK(m.max_disagreement == 0.0);
        for (std::size_t k = 0; k < grid.size(); ++k) {
            if (grid[k] <= wells[1]) CHECK(m.predicted[k] == pairs[0].predicted[k]);
            if (beta >= 0.5 && grid[k] >= -2.0 && grid[k] <= 2.0) CHECK(m.predicted[k] == beta);
        }
        const auto single = theory::predict_multiwell(std::span(pairs).first(1), std::span(wells).first(2));
        CHECK(single.predicted == pairs[0].predicted);
        CHECK(single.piecewise == pairs[0].predicted);
    }
    std::vector<theory::TheoremPrediction> bad(2);
    bad[0].theta_grid = {0.0, 1.0};
    bad[0].predicted = {0.0, 0.0};
    bad[1].theta_grid = {0.0, 2.0};
    bad[1].predicted = {0.0, 0.0};
    CHECK_THROWS_AS(theory::predict_multiwell(bad, wells), ParameterError);
    CHECK_THROWS_AS(theory::predict_multiwell(bad, std::span(wells).first(2)), ParameterError);
}

TEST_CASE("convexification commutes exactly without potential") {
    const auto G = ham::power_two_well(-1.0, 1.0);
    const auto conv = ham::make_spec({ham::tabulate_two_well_convexification(G, -4.0, 4.0, 161)}, G.alpha0, G.alpha1,
                                     G.gamma, "conv");
    const auto grid = linspace(-2.5, 2.5, 21);  // holds both wells
    auto cfg = solver(0.05, 4.0);
    const env::EnvModel m{env::ConstantV{0.0}, env::ConstantA{0.5}};
    double w = 0.0;
    for (const auto& g : {ham::single(G, 0), ham::single(G, 1), conv})
        w = std::max(w, homog::ensemble_half_width(g, 0.0, grid, cfg));
    const auto ens = homog::sample_ensemble(m, std::vector<std::uint64_t>{1}, w, cfg.dx);
    const auto cm = homog::estimate_curve(ens, ham::single(G, 0), 0.0, grid, cfg);
    const auto cp = homog::estimate_curve(ens, ham::single(G, 1), 0.0, grid, cfg);
    const auto cc = homog::estimate_curve(ens, conv, 0.0, grid, cfg);
    const auto r = theory::check_commute(cm, cp, cc, 0.0, -1.0, 1.0);
    CHECK(r.max_deviation <= 2e-3);
    CHECK(r.form_deviation <= 2e-3);
    for (std::size_t k = 0; k < grid.size(); ++k)
        CHECK(r.conv_curve[k] == doctest::Approx(ham::two_well_convexification(G, grid[k])).epsilon(1e-6));

    auto other = cm;
    other.theta_grid.back() += 0.1;
    CHECK_THROWS_AS(theory::check_commute(cm, other, cc, 0.0, -1.0, 1.0), ParameterError);
}

TEST_CASE("commute report on symmetric strong curves") {
    const auto grid = linspace(-2.5, 2.5, 21);
    const auto cm = piece_curve(grid, -1.0, 1.0, "minus");
    const auto cp = piece_curve(grid, 1.0, 1.0, "plus");
    const auto flat = synthetic(grid, [](double t) {
        return t < -1.0 ? 1.0 + 0.5 * (t + 1) * (t + 1) : t > 1.0 ? 1.0 + 0.5 * (t - 1) * (t - 1) : 1.0;
    });
    const auto r = theory::check_commute(cm, cp, flat, 1.0, -1.0, 1.0);
    CHECK(r.max_deviation < 1e-12);
    CHECK(r.form_deviation < 1e-12);
}

TEST_CASE("corrector bands collapse for a constant potential") {
    const ham::ConvexPiece g{0.0, ham::PowerWell{2.0, 0.5}};
    const std::vector<double> grad(50, 0.0);
    const auto r = theory::check_corrector_bounds(grad, g, 1.0, 0.0, 0.5, 1e-12);
    CHECK(r.band_lo == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.band_hi == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.fraction == 1.0);
    CHECK(r.degenerate);
    const auto l = theory::check_corrector_bounds(grad, g, -1.0, 0.0, 0.5, 1e-12);
    CHECK(l.band_lo == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(l.band_hi == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(l.fraction == 1.0);

    // with beta > 0: g(q) in [lambda - beta, lambda], q = sqrt(2 g)
    const auto b = theory::check_corrector_bounds(grad, g, 1.2, 0.3, 0.72, 1e-9);
    CHECK(b.band_lo == doctest::Approx(std::sqrt(2 * 0.42)).epsilon(1e-9));
    CHECK(b.band_hi == doctest::Approx(1.2).epsilon(1e-9));
    CHECK_FALSE(b.degenerate);
    CHECK(b.fraction == 1.0);

    CHECK_THROWS_AS(theory::check_corrector_bounds(grad, g, 1.0, 0.5, 0.5, 0.0), PreconditionError);
    CHECK_THROWS_AS(theory::check_corrector_bounds(grad, g, 1.0, 0.5, 0.4, 0.0), PreconditionError);
}

TEST_CASE("corrector gradients of a single piece stay in the band") {
    const auto G = ham::single(ham::power_two_well(-1.0, 1.0), 1);
    const double beta = 0.5;
    auto cfg = solver(0.05, 1.0);
    const std::vector<double> ds{0.2, 0.1, 0.05};
    for (double theta : {2.5, -0.8}) {
        const double w = pde::discounted_half_width(G, beta, theta, ds.back(), cfg) + 1.0;
        const auto e = sample({env::PeriodicV{env::PeriodicProfile::Sine, 3.0, 0.0}, env::ConstantA{0.5}}, w, 0.05, 0);
        const auto prof = pde::corrector_profile(e, G, beta, theta, cfg, ds);
        REQUIRE(prof.lambda_est >= beta + 0.1);
        const auto r = theory::check_corrector_bounds(prof.grad, G.pieces[0], theta, beta, prof.lambda_est, 1e-2);
        CHECK(r.fraction >= 0.99);
        CHECK(r.band_lo < r.band_hi);
    }
}

TEST_CASE("discounted profiles are checked against the local level") {
    const ham::ConvexPiece g{0.0, ham::PowerWell{2.0, 0.5}};
    pde::CorrectorProfile p;
    p.theta = 1.2;
    p.discounts = {0.2, 0.1};
    p.lambda_est = 0.72;
    // local levels 0.72, 0.82, 0.42, 0.22; band [sqrt(2 (L - beta)), sqrt(2 L)]
    p.F = {0.0, 1.0, -3.0, -5.0};
    p.x = {0.0, 1.0, 2.0, 3.0};
    for (double q : {1.1, 1.25, 0.6, 0.5}) p.grad.push_back(q - p.theta);
    const auto r = theory::check_discounted_bounds(p, g, 0.3, 1e-9);
    CHECK(r.nodes == 4);
    CHECK(r.inside == 3);  // the last level is below beta
    CHECK(r.band_lo == doctest::Approx(std::sqrt(0.84)));
    CHECK(r.band_hi == doctest::Approx(1.2));
    const auto global = theory::check_corrector_bounds(p.grad, g, p.theta, 0.3, p.lambda_est, 1e-9);
    CHECK(global.inside == 1);

    const auto ph = theory::check_discounted_bounds(p, g, 0.3, 1e-9, theory::PHatCheck{1.0, theory::PHatSide::Below});
    REQUIRE(ph.phat_fraction);
    CHECK(*ph.phat_fraction == doctest::Approx(0.25));  // only q = 0.6 of the banded nodes
    p.theta = 0.0;
    CHECK_THROWS_AS(theory::check_discounted_bounds(p, g, 0.3, 1e-9), PreconditionError);
}

TEST_CASE("chi subsolution closed form for unit diffusion") {
    const auto G = ham::power_two_well(-1.0, 1.0);
    const auto e = sample({env::ConstantV{1.0}, env::ConstantA{1.0}}, 6.0, 0.05, 0);
    const env::HillValleyWitness wit{-2.0, 2.0, 1.0, 0.9, 2.0, env::WitnessKind::Hill};
    // theta + eps p stays in [2.7, 3.3] where G > beta h
    const double theta = 3.0, eps = 0.05;
    const auto b = theory::build_chi_subsolution(e, wit, theta, G, 1.0, eps);
    CHECK(b.x0 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b.rate == doctest::Approx(0.9 - eps));
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double x = e.x(i);
        CHECK(b.value0[i] == doctest::Approx(theta * x - 0.5 * eps * x * x).epsilon(1e-12));
        CHECK(b.d1[i] == doctest::Approx(theta - eps * x).epsilon(1e-12));
        CHECK(b.d2[i] == doctest::Approx(-eps));
    }
    CHECK(b.initial_ok);
    CHECK(b.residual_ok);
    CHECK(b.value(3, 2.0) == doctest::Approx(b.value0[3] + 2.0 * b.rate));
}

TEST_CASE("degenerate chi subsolution needs a hill everywhere") {
    const auto G = ham::power_two_well(-1.0, 1.0);
    const env::HillValleyWitness wit{-2.0, 2.0, 1.0, 0.8, 2.0, env::WitnessKind::Hill};
    const auto hill = sample({env::ConstantV{1.0}, env::ConstantA{0.5}}, 10.0, 0.05, 0);
    const auto b = theory::build_chi_subsolution(hill, wit, 0.4, G, 1.0, 0.0);
    CHECK(b.rate == doctest::Approx(0.8));
    CHECK(b.residual_ok);
    for (std::size_t i = 0; i < hill.size(); ++i) CHECK(b.value0[i] == doctest::Approx(0.4 * hill.x(i)));
    const auto bumpy = sample({env::PeriodicV{env::PeriodicProfile::Triangle, 4.0, 0.0}, env::ConstantA{0.5}}, 10.0,
                              0.05, 0);
    const auto c = theory::build_chi_subsolution(bumpy, wit, 0.4, G, 1.0, 0.0);
    CHECK_FALSE(c.residual_ok);
    // beta h - G(theta) - beta min V with min V = 0
    CHECK(c.max_violation == doctest::Approx(0.8 - ham::eval(G, 0.4)).epsilon(1e-9));
}

TEST_CASE("s supersolution closed form and C1 junction") {
    const auto G = ham::power_two_well(-1.0, 1.0);
    const double y = 2.0, c = 1.0;
    const auto e = sample({env::ConstantV{0.0}, env::ConstantA{1.0}}, 6.0, 0.05, 0);
    const env::HillValleyWitness wit{-y, y, 1.0, 0.1, y, env::WitnessKind::Valley};
    const auto b = theory::build_s_supersolution(e, wit, 0.3, c, G, 1.0);
    CHECK(b.x0 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(b.rate == doctest::Approx(std::max(1.0, 0.5) + 1.5 * c / y + 0.1));
    for (std::size_t i = 0; i < e.size(); ++i) {
        const double x = e.x(i);
        const double want = x <= -y ? -c : x >= y ? c : 0.5 * c * (x / y) * (3.0 - (x / y) * (x / y));
        CHECK(b.d1[i] == doctest::Approx(want).epsilon(1e-12));
    }
    const auto at = [&](double x) { return e.nearest(x); };
    CHECK(b.d1[at(-y)] == -c);
    CHECK(b.d1[at(y)] == c);
    CHECK(std::abs(b.d2[at(-y)]) < 1e-12);
    CHECK(std::abs(b.d2[at(y)]) < 1e-12);
    CHECK(b.initial_ok);
    CHECK(b.residual_ok);

    CHECK_THROWS_AS(theory::build_s_supersolution(e, wit, 1.5, c, G, 1.0), ParameterError);
    CHECK_THROWS_AS(theory::build_s_supersolution(e, wit, 0.3, 0.5, G, 1.0), ParameterError);
    auto hill = wit;
    hill.kind = env::WitnessKind::Hill;
    CHECK_THROWS_AS(theory::build_s_supersolution(e, hill, 0.3, c, G, 1.0), ParameterError);
    CHECK_THROWS_AS(theory::build_chi_subsolution(e, wit, 0.3, G, 1.0, 0.1), ParameterError);
}

TEST_CASE("barriers on found witnesses bracket the evolved solution") {
    const auto G = ham::power_two_well(-1.0, 1.0);
    const double beta = 1.0;
    const env::EnvModel m{env::RenewalBernoulli{env::PointMassGap{10.0}, 0.5}, env::ConstantA{0.5}};
    std::size_t built = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto e = env::sample_environment(m, -60.0, 60.0, 0.1, seed);
        const auto hill = env::find_witness(e, 0.1, 5.0, env::WitnessKind::Hill);
        const auto valley = env::find_witness(e, 0.05, 5.0, env::WitnessKind::Valley);
        if (!hill || !valley) continue;
        ++built;
        // eps small enough that G(eps p) >= beta h over the whole grid
        const double a_floor = std::max(0.5, hill->delta);
        const double pmax = (e.grid_max - e.grid_min) / a_floor;
        const double eps = 0.5 / pmax;
        const auto lo = theory::build_chi_subsolution(e, *hill, 0.0, G, beta, eps);
        const auto hi = theory::build_s_supersolution(e, *valley, 0.0, 1.0, G, beta);
        CHECK(lo.initial_ok);
        CHECK(hi.initial_ok);
        CHECK(lo.residual_ok);
        CHECK(hi.residual_ok);
        const auto r = theory::check_barrier_comparison(e, G, beta, 0.0, &lo, &hi, 400);
        CHECK(r.checked > 0);
        CHECK(r.lower_violations == 0);
        CHECK(r.upper_violations == 0);
        CHECK(r.worst_lower >= -1e-9);
        CHECK(r.worst_upper >= -1e-9);
    }
    CHECK(built >= 3);
}
