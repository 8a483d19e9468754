#include "vhj/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "vhj/errors.hpp"
#include "vhj/homog.hpp"
#include "vhj/parallel.hpp"
#include "vhj/theory.hpp"

namespace vhj::experiment {

using nlohmann::json;
using config::ExperimentConfig;
using config::Kind;

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Points of grid inside [lo, hi] together with the extra points.
std::vector<double> subgrid(std::span<const double> grid, double lo, double hi, std::vector<double> extra) {
    std::vector<double> g;
    for (double t : grid)
        if (t >= lo - 1e-12 && t <= hi + 1e-12) g.push_back(t);
    for (double t : extra) g.push_back(t);
    std::sort(g.begin(), g.end());
    std::vector<double> out;
    for (double t : g)
        if (out.empty() || t - out.back() > 1e-9) out.push_back(t);
    return out;
}

struct Runner {
    const ExperimentConfig& cfg;
    unsigned workers;
    const Progress& progress;
    Result& result;

    void note(const std::string& msg) const {
        if (progress) progress(msg);
    }

    void check(std::string name, bool pass, double value, double tol, std::string detail = {}) {
        result.checks.push_back({std::move(name), pass, value, tol, std::move(detail)});
        result.log.push_back({{"event", "check"},
                              {"name", result.checks.back().name},
                              {"pass", pass},
                              {"value", value},
                              {"tolerance", tol}});
    }

    double dmin() const { return cfg.corrector.discounts.back(); }

    double half_width_for(const std::vector<std::pair<const ham::HamiltonianSpec*, std::vector<double>>>& jobs,
                          bool discounted) const {
        double w = 0.0;
        for (const auto& [spec, grid] : jobs) {
            if (grid.empty()) continue;
            if (discounted) {
                for (double th : grid)
                    w = std::max(w, pde::discounted_half_width(*spec, cfg.beta, th, dmin(), cfg.solver));
                w = std::ceil(w / cfg.solver.dx + 1.0) * cfg.solver.dx;
            } else {
                w = std::max(w, homog::ensemble_half_width(*spec, cfg.beta, grid, cfg.solver));
            }
        }
        return w;
    }

    std::vector<env::Environment> ensemble(double hw) const {
        return homog::sample_ensemble(cfg.environment, cfg.seeds, hw, cfg.solver.dx, workers);
    }

    homog::EffectiveCurve curve(const std::vector<env::Environment>& ens, const ham::HamiltonianSpec& G,
                                const std::vector<double>& grid, const std::string& label) {
        homog::EffectiveCurve c;
        if (grid.empty()) {
            c.spec_id = G.id;
            c.beta = cfg.beta;
            return c;
        }
        note("estimating " + label + " on " + std::to_string(grid.size()) + " slopes x " +
             std::to_string(ens.size()) + " seeds");
        if (cfg.method == homog::Method::ParabolicSlope) {
            c = homog::estimate_curve(ens, G, cfg.beta, grid, cfg.solver, workers, cfg.tolerances.convexity);
        } else {
            c.theta_grid = grid;
            c.spec_id = G.id;
            c.beta = cfg.beta;
            for (const auto& e : ens) c.seeds.push_back(e.seed);
            for (double th : grid)
                c.estimates.push_back(
                    homog::estimate_point_discounted(ens, G, cfg.beta, th, cfg.solver, cfg.corrector.discounts, workers));
            if (G.pieces.size() == 1) c.convexity = homog::check_convexity(c.theta_grid, c.values(), cfg.tolerances.convexity);
        }
        for (const auto& est : c.estimates) {
            json per = json::array();
            for (const auto& r : est.runs) per.push_back({{"seed", r.seed}, {"value", r.value}});
            result.log.push_back({{"event", "estimate"},
                                  {"curve", label},
                                  {"theta", est.theta},
                                  {"value", est.value},
                                  {"std_error", est.std_error},
                                  {"runs", per}});
        }
        add_curve_table(c, label);
        return c;
    }

    void add_curve_table(const homog::EffectiveCurve& c, const std::string& label) {
        report::Table t;
        t.name = label;
        t.columns = {"theta", "value", "std_error", "fit_residual", "h_lower", "h_upper"};
        for (const auto& e : c.estimates)
            t.rows.push_back({e.theta, e.value, e.std_error, e.fit_residual, e.h_lower, e.h_upper});
        result.tables.push_back(std::move(t));
    }

    // ------------------------------------------------------------------

    void run_curve() {
        const auto& G = cfg.hamiltonian;
        const auto ens = ensemble(half_width_for({{&G, cfg.theta_grid}}, cfg.method == homog::Method::DiscountedLimit));
        const auto c = curve(ens, G, cfg.theta_grid, "curve");
        auto& t = result.tables.back();
        t.columns.push_back("G");
        for (std::size_t i = 0; i < t.rows.size(); ++i) t.rows[i].push_back(ham::eval(G, c.theta_grid[i]));
        result.plots.push_back({"curve", "effective Hamiltonian", "curve", "theta", {"value", "G"}, {"G"}});
        if (const auto* cv = std::get_if<env::ConstantV>(&cfg.environment.v)) {
            double dev = 0.0;
            for (const auto& e : c.estimates)
                dev = std::max(dev, std::abs(e.value - (ham::eval(G, e.theta) + cfg.beta * cv->level)));
            check("affine_identity", dev <= cfg.tolerances.exact, dev, cfg.tolerances.exact,
                  "max |estimate - (G(theta) + beta v0)|");
        }
        if (c.convexity) {
            check("convexity", c.convexity->ok, c.convexity->min_second_difference, -cfg.tolerances.convexity,
                  "smallest scaled second difference");
        }
        result.details["spec"] = G.id;
    }

    void run_t11() {
        const auto& G = cfg.hamiltonian;
        if (G.pieces.size() != 2) throw ConfigError("verify_t11 needs a Hamiltonian with exactly two pieces");
        const double cm = G.pieces[0].well, cp = G.pieces[1].well, ph = G.crossings[0];
        const double gc = ham::eval(G, ph);
        const bool strong = cfg.beta >= gc;
        const auto& grid = cfg.theta_grid;
        const double lo = grid.front(), hi = grid.back();
        const auto Gm = ham::single(G, 0), Gp = ham::single(G, 1);
        const auto gm = strong ? subgrid(grid, lo, cm, {cm}) : subgrid(grid, lo, ph, {cm, ph});
        const auto gp = strong ? subgrid(grid, cp, hi, {cp}) : subgrid(grid, ph, hi, {ph, cp});
        const bool disc = cfg.method == homog::Method::DiscountedLimit;
        const auto ens = ensemble(half_width_for({{&G, grid}, {&Gm, gm}, {&Gp, gp}}, disc));
        const auto cG = curve(ens, G, grid, "G");
        const auto cM = curve(ens, Gm, gm, "G_minus");
        const auto cP = curve(ens, Gp, gp, "G_plus");
        const auto pred =
            theory::predict_two_well(cM, cP, cm, cp, ph, cfg.beta, gc, grid, cfg.tolerances.flat_root);
        fill_prediction_table(cG, pred.predicted, "G");
        result.plots.push_back({"prediction", "two-well prediction", "G", "theta", {"value", "predicted", "G"}, {"predicted"}});

        double dev = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) dev = std::max(dev, std::abs(cG.estimates[i].value - pred.predicted[i]));
        check("prediction", dev <= cfg.tolerances.prediction, dev, cfg.tolerances.prediction,
              "max |estimate - prediction| over the grid");
        plateau_check(cG, pred);
        result.details["regime"] = theory::to_string(pred.regime);
        result.details["flat_interval"] = {pred.theta_minus, pred.theta_plus};
        result.details["flat_level"] = pred.flat_level;
        result.details["p_hat"] = ph;
        result.details["gc_at_p_hat"] = gc;
        result.details["edges_clamped"] = {pred.minus_at_edge, pred.plus_at_edge};
    }

    void plateau_check(const homog::EffectiveCurve& cG, const theory::TheoremPrediction& pred) {
        double lo = pred.theta_minus, hi = pred.theta_plus;
        if (pred.regime == theory::Regime::StrongPotential && cfg.plateau_interval) {
            lo = cfg.plateau_interval->first;
            hi = cfg.plateau_interval->second;
        }
        double dev = 0.0;
        std::size_t n = 0;
        for (const auto& e : cG.estimates)
            if (e.theta >= lo - 1e-12 && e.theta <= hi + 1e-12) {
                dev = std::max(dev, std::abs(e.value - pred.flat_level));
                ++n;
            }
        if (n == 0) {
            check("plateau", false, 0.0, cfg.tolerances.plateau, "no grid point inside the flat interval");
            return;
        }
        check("plateau", dev <= cfg.tolerances.plateau, dev, cfg.tolerances.plateau,
              "max |estimate - " + num(pred.flat_level) + "| on [" + num(lo) + ", " + num(hi) + "]");
    }

    void fill_prediction_table(const homog::EffectiveCurve& c, const std::vector<double>& predicted,
                               const std::string& table) {
        for (auto& t : result.tables) {
            if (t.name != table) continue;
            t.columns.insert(t.columns.end(), {"predicted", "deviation", "G"});
            for (std::size_t i = 0; i < t.rows.size(); ++i)
                t.rows[i].insert(t.rows[i].end(), {predicted[i], c.estimates[i].value - predicted[i],
                                                   ham::eval(cfg.hamiltonian, c.theta_grid[i])});
        }
    }

    void run_t12() {
        const auto& G = cfg.hamiltonian;
        const std::size_t n = G.pieces.size();
        if (n < 2) throw ConfigError("verify_t12 needs at least two pieces");
        const auto& grid = cfg.theta_grid;
        const double lo = grid.front(), hi = grid.back();
        std::vector<ham::HamiltonianSpec> pieces;
        std::vector<std::vector<double>> grids;
        std::vector<double> wells;
        for (std::size_t j = 0; j < n; ++j) {
            pieces.push_back(ham::single(G, j));
            wells.push_back(G.pieces[j].well);
            std::vector<double> extra{G.pieces[j].well};
            double glo = lo, ghi = hi;
            if (j > 0) extra.push_back(G.crossings[j - 1]);
            if (j + 1 < n) extra.push_back(G.crossings[j]);
            if (j == 0) ghi = G.crossings[0];
            if (j + 1 == n) glo = G.crossings[n - 2];
            grids.push_back(subgrid(grid, glo, ghi, extra));
        }
        std::vector<std::pair<const ham::HamiltonianSpec*, std::vector<double>>> jobs{{&G, grid}};
        for (std::size_t j = 0; j < n; ++j) jobs.push_back({&pieces[j], grids[j]});
        const auto ens = ensemble(half_width_for(jobs, cfg.method == homog::Method::DiscountedLimit));
        const auto cG = curve(ens, G, grid, "G");
        std::vector<homog::EffectiveCurve> cp;
        for (std::size_t j = 0; j < n; ++j) cp.push_back(curve(ens, pieces[j], grids[j], "G_" + std::to_string(j)));
        std::vector<theory::TheoremPrediction> pairs;
        json pj = json::array();
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double ph = G.crossings[i];
            const double gc = std::min(ham::eval(G.pieces[i], ph), ham::eval(G.pieces[i + 1], ph));
            pairs.push_back(theory::predict_two_well(cp[i], cp[i + 1], wells[i], wells[i + 1], ph, cfg.beta, gc, grid,
                                                     cfg.tolerances.flat_root));
            pj.push_back({{"pair", {i, i + 1}},
                          {"regime", theory::to_string(pairs.back().regime)},
                          {"flat_interval", {pairs.back().theta_minus, pairs.back().theta_plus}},
                          {"flat_level", pairs.back().flat_level}});
        }
        const auto mw = theory::predict_multiwell(pairs, wells, cfg.tolerances.multiwell_forms);
        fill_prediction_table(cG, mw.predicted, "G");
        auto& t = result.tables.front();
        t.columns.push_back("piecewise");
        for (std::size_t i = 0; i < t.rows.size(); ++i) t.rows[i].push_back(mw.piecewise[i]);
        result.plots.push_back({"prediction", "multi-well prediction", "G", "theta", {"value", "predicted", "G"}, {"predicted"}});
        double dev = 0.0;
        for (std::size_t i = 0; i < grid.size(); ++i) dev = std::max(dev, std::abs(cG.estimates[i].value - mw.predicted[i]));
        check("prediction", dev <= cfg.tolerances.prediction, dev, cfg.tolerances.prediction,
              "max |estimate - min over pairs|");
        check("forms_agree", mw.agree, mw.max_disagreement, cfg.tolerances.multiwell_forms,
              "pointwise-min form against the piecewise form");
        result.details["pairs"] = pj;
    }

    void run_commute() {
        const auto& G = cfg.hamiltonian;
        if (G.pieces.size() != 2) throw ConfigError("commute needs a Hamiltonian with exactly two pieces");
        const double cm = G.pieces[0].well, cp = G.pieces[1].well;
        const auto& grid = cfg.theta_grid;
        const double span = std::max({std::abs(grid.front()), std::abs(grid.back()), std::abs(cm), std::abs(cp)});
        const double tab = 2.0 * span + 6.0;
        auto conv = ham::make_spec({ham::tabulate_two_well_convexification(G, -tab, tab, 4001)}, G.alpha0, G.alpha1,
                                   G.gamma, "conv(" + G.id + ")");
        const auto Gm = ham::single(G, 0), Gp = ham::single(G, 1);
        const auto ens = ensemble(
            half_width_for({{&Gm, grid}, {&Gp, grid}, {&conv, grid}}, cfg.method == homog::Method::DiscountedLimit));
        const auto cM = curve(ens, Gm, grid, "G_minus");
        const auto cP = curve(ens, Gp, grid, "G_plus");
        const auto cC = curve(ens, conv, grid, "conv");
        const auto r = theory::check_commute(cM, cP, cC, cfg.beta, cm, cp);
        for (auto& t : result.tables) {
            if (t.name != "conv") continue;
            t.columns.insert(t.columns.end(), {"envelope", "three_piece"});
            for (std::size_t i = 0; i < t.rows.size(); ++i)
                t.rows[i].insert(t.rows[i].end(), {r.envelope[i], r.three_piece[i]});
        }
        result.plots.push_back({"commute", "convexification commutes", "conv", "theta", {"value", "envelope", "three_piece"}, {"envelope"}});
        check("commute", r.max_deviation <= cfg.tolerances.commute, r.max_deviation, cfg.tolerances.commute,
              "max |conv(min of piece curves) - curve of conv(G)|");
        check("three_piece_form", r.form_deviation <= cfg.tolerances.commute, r.form_deviation, cfg.tolerances.commute,
              "max |three-piece form - curve of conv(G)|");
    }

    void run_bands() {
        const auto& G = cfg.hamiltonian;
        if (cfg.corrector.piece >= G.pieces.size()) throw ConfigError("'corrector.piece' is out of range");
        const auto spec = ham::single(G, cfg.corrector.piece);
        const auto& g = spec.pieces[0];
        const auto ens = ensemble(half_width_for({{&spec, cfg.theta_grid}}, true));
        report::Table t;
        t.name = "bands";
        t.columns = {"theta", "lambda", "std_error", "band_lo", "band_hi", "fraction", "eligible"};
        std::size_t eligible = 0, passed = 0;
        double worst = 1.0;
        json per = json::array();
        for (double th : cfg.theta_grid) {
            note("corrector profiles at theta = " + num(th));
            std::vector<pde::CorrectorProfile> prof(ens.size());
            parallel_for(ens.size(), workers, [&](std::size_t i) {
                prof[i] = pde::corrector_profile(ens[i], spec, cfg.beta, th, cfg.solver, cfg.corrector.discounts);
            });
            double mean = 0.0, sd = 0.0;
            for (const auto& p : prof) mean += p.lambda_limit;
            mean /= static_cast<double>(prof.size());
            if (prof.size() > 1) {
                for (const auto& p : prof) sd += (p.lambda_limit - mean) * (p.lambda_limit - mean);
                sd = std::sqrt(sd / static_cast<double>(prof.size() - 1));
            }
            const bool ok = mean >= cfg.beta + cfg.tolerances.band_margin && th != g.well;
            std::vector<double> row{th, mean, sd, NAN, NAN, NAN, ok ? 1.0 : 0.0};
            if (ok) {
                std::optional<theory::PHatCheck> ph;
                if (cfg.corrector.p_hat)
                    ph = theory::PHatCheck{*cfg.corrector.p_hat,
                                           cfg.corrector.phat_below ? theory::PHatSide::Below : theory::PHatSide::Above};
                const double slack = cfg.tolerances.band_slack + sd;
                // gate: every node against its local discounted level; the windowed
                // check against each seed's extrapolated level is reported alongside
                std::size_t nodes = 0, inside = 0, phat_ok = 0, wnodes = 0, winside = 0;
                double excess = 0.0;
                for (const auto& p : prof) {
                    const auto r = theory::check_discounted_bounds(p, g, cfg.beta, slack, ph);
                    nodes += r.nodes;
                    inside += r.inside;
                    if (r.phat_fraction) phat_ok += static_cast<std::size_t>(std::llround(*r.phat_fraction * r.nodes));
                    excess = std::max(excess, r.worst_excess);
                    std::vector<double> grads;
                    for (std::size_t i = 0; i < p.grad.size(); ++i)
                        if (std::abs(p.x[i]) <= cfg.corrector.window) grads.push_back(p.grad[i]);
                    if (!(p.lambda_limit > cfg.beta)) {
                        wnodes += grads.size();
                        continue;
                    }
                    const auto w = theory::check_corrector_bounds(grads, g, th, cfg.beta, p.lambda_limit, slack);
                    wnodes += w.nodes;
                    winside += w.inside;
                }
                const auto band = theory::check_corrector_bounds({}, g, th, cfg.beta, mean, slack);
                const double fraction = nodes ? static_cast<double>(inside) / static_cast<double>(nodes) : 0.0;
                row[3] = band.band_lo;
                row[4] = band.band_hi;
                row[5] = fraction;
                ++eligible;
                bool pass = fraction >= cfg.tolerances.band_fraction;
                json e = {{"theta", th},
                          {"lambda", mean},
                          {"band", {band.band_lo, band.band_hi}},
                          {"fraction", fraction},
                          {"nodes", nodes},
                          {"worst_excess", excess},
                          {"window_fraction", wnodes ? static_cast<double>(winside) / static_cast<double>(wnodes) : 0.0},
                          {"degenerate", band.degenerate}};
                if (ph) {
                    const double pf = nodes ? static_cast<double>(phat_ok) / static_cast<double>(nodes) : 0.0;
                    pass = pass && pf >= cfg.tolerances.band_fraction;
                    e["p_hat_fraction"] = pf;
                }
                if (pass) ++passed;
                worst = std::min(worst, fraction);
                per.push_back(e);
            }
            t.rows.push_back(row);
        }
        result.tables.push_back(std::move(t));
        result.plots.push_back({"lambda", "discounted estimate", "bands", "theta", {"lambda", "band_lo", "band_hi"}, {"band_lo", "band_hi"}});
        result.details["bands"] = per;
        if (eligible == 0) {
            check("bands", false, 0.0, cfg.tolerances.band_fraction, "no slope with lambda >= beta + margin");
            return;
        }
        check("bands", passed == eligible, worst, cfg.tolerances.band_fraction,
              std::to_string(passed) + " of " + std::to_string(eligible) + " slopes inside the band");
    }

    void run_barriers() {
        const auto& B = cfg.barriers;
        const auto& G = cfg.hamiltonian;
        const double hw = std::ceil(B.half_width / cfg.solver.dx) * cfg.solver.dx;
        const auto ens = ensemble(hw);
        report::Table t;
        t.name = "barriers";
        t.columns = {"seed", "sub_violation", "sub_slack", "sup_violation", "sup_slack", "lower_violations",
                     "upper_violations", "checked"};
        std::size_t ok_all = 0;
        json per = json::array();
        for (const auto& e : ens) {
            const auto wh = env::find_witness(e, B.hill_h, B.y, env::WitnessKind::Hill);
            const auto wv = env::find_witness(e, B.valley_h, B.y, env::WitnessKind::Valley);
            if (!wh || !wv) {
                per.push_back({{"seed", e.seed}, {"witness", false}});
                continue;
            }
            const auto sub = theory::build_chi_subsolution(e, *wh, B.theta, G, cfg.beta, B.eps);
            const auto sup = theory::build_s_supersolution(e, *wv, B.theta, B.c, G, cfg.beta);
            const auto cr = theory::check_barrier_comparison(e, G, cfg.beta, B.theta, &sub, &sup, B.steps,
                                                             cfg.solver.cfl_safety);
            const bool ok = sub.residual_ok && sup.residual_ok && sub.initial_ok && sup.initial_ok &&
                            cr.lower_violations == 0 && cr.upper_violations == 0;
            if (ok) ++ok_all;
            t.rows.push_back({static_cast<double>(e.seed), sub.max_violation, sub.slack, sup.max_violation, sup.slack,
                              static_cast<double>(cr.lower_violations), static_cast<double>(cr.upper_violations),
                              static_cast<double>(cr.checked)});
            per.push_back({{"seed", e.seed},
                           {"witness", true},
                           {"hill", {wh->l1, wh->l2, wh->delta}},
                           {"valley", {wv->l1, wv->l2, wv->delta}},
                           {"sub_rate", sub.rate},
                           {"sup_rate", sup.rate},
                           {"steps", cr.steps},
                           {"ok", ok}});
        }
        result.tables.push_back(std::move(t));
        result.details["barriers"] = per;
        check("barriers", ok_all == ens.size(), static_cast<double>(ok_all), static_cast<double>(ens.size()),
              "seeds whose barriers validate and bracket the evolved solution");
    }

    void run_witness() {
        const auto& W = cfg.witness;
        const double hw = std::ceil(W.half_width / cfg.solver.dx) * cfg.solver.dx;
        const auto ens = ensemble(hw);
        report::Table t;
        t.name = "witness";
        t.columns = {"seed", "found", "l1", "l2", "delta", "scaled_length", "valid"};
        std::size_t found = 0, valid = 0;
        for (const auto& e : ens) {
            const auto w = env::find_witness(e, W.h, W.y, W.kind, {W.delta_min});
            if (!w) {
                t.rows.push_back({static_cast<double>(e.seed), 0, NAN, NAN, NAN, NAN, 0});
                continue;
            }
            ++found;
            const bool ok = env::validate_witness(e, *w);
            if (ok) ++valid;
            t.rows.push_back({static_cast<double>(e.seed), 1, w->l1, w->l2, w->delta,
                              env::scaled_length(e, w->l1, w->l2, w->delta), ok ? 1.0 : 0.0});
        }
        result.tables.push_back(std::move(t));
        result.details["found"] = found;
        check("witness_valid", valid == found, static_cast<double>(valid), static_cast<double>(found),
              "found witnesses that re-validate");
    }
};

std::string table_file(const std::string& name, const std::string& table, std::size_t count) {
    return count == 1 ? name : name + "_" + table;
}

}  // namespace

bool Result::passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

json Result::to_json() const {
    json j;
    j["name"] = name;
    j["kind"] = config::to_string(kind);
    j["config_hash"] = config_hash;
    j["seeds"] = seeds;
    j["passed"] = passed();
    json cs = json::array();
    for (const auto& c : checks)
        cs.push_back({{"name", c.name}, {"pass", c.pass}, {"value", c.value}, {"tolerance", c.tolerance}, {"detail", c.detail}});
    j["checks"] = cs;
    j["details"] = details;
    json tabs = json::object();
    for (const auto& t : tables) {
        json rows = json::array();
        for (const auto& r : t.rows) {
            json row = json::object();
            for (std::size_t i = 0; i < t.columns.size() && i < r.size(); ++i)
                row[t.columns[i]] = std::isfinite(r[i]) ? json(r[i]) : json(nullptr);
            rows.push_back(row);
        }
        tabs[t.name] = rows;
    }
    j["tables"] = tabs;
    return j;
}

Result run(const ExperimentConfig& cfg, unsigned workers, const Progress& progress) {
    Result r;
    r.name = cfg.name;
    r.kind = cfg.kind;
    r.config_hash = config::config_hash(cfg);
    r.seeds = cfg.seeds;
    r.log.push_back({{"event", "start"}, {"name", cfg.name}, {"kind", config::to_string(cfg.kind)},
                     {"config_hash", r.config_hash}, {"seeds", cfg.seeds}});
    Runner run{cfg, workers, progress, r};
    switch (cfg.kind) {
        case Kind::Curve: run.run_curve(); break;
        case Kind::VerifyT11: run.run_t11(); break;
        case Kind::VerifyT12: run.run_t12(); break;
        case Kind::Commute: run.run_commute(); break;
        case Kind::CorrectorBands: run.run_bands(); break;
        case Kind::Barriers: run.run_barriers(); break;
        case Kind::WitnessSearch: run.run_witness(); break;
    }
    r.log.push_back({{"event", "finish"}, {"passed", r.passed()}});
    return r;
}

std::string describe(const ExperimentConfig& cfg) {
    std::ostringstream o;
    o << "experiment   " << cfg.name << " (" << config::to_string(cfg.kind) << ")\n";
    o << "config hash  " << config::config_hash(cfg) << "\n";
    o << "environment  " << env::describe(cfg.environment) << "\n";
    if (!cfg.hamiltonian.pieces.empty()) o << "hamiltonian  " << ham::describe(cfg.hamiltonian) << "\n";
    o << "beta         " << cfg.beta << "\n";
    o << "seeds        " << cfg.seeds.size() << " (" << cfg.seeds.front() << " .. " << cfg.seeds.back() << ")\n";
    o << "solver       dx=" << cfg.solver.dx << " horizon=" << cfg.solver.horizon
      << " method=" << homog::to_string(cfg.method) << "\n";
    const auto& G = cfg.hamiltonian;
    auto steps = [&](const ham::HamiltonianSpec& spec, double th) {
        const double cap = cfg.solver.lipschitz_cap > 0 ? cfg.solver.lipschitz_cap : pde::slope_cap(spec, cfg.beta, th);
        const double alpha = cfg.solver.lf_dissipation > 0 ? cfg.solver.lf_dissipation
                                                           : std::max(1e-3, 1.1 * ham::max_abs_derivative(spec, -cap, cap));
        const double dt = cfg.solver.dt > 0 ? cfg.solver.dt
                                            : cfg.solver.cfl_safety / (2.0 / (cfg.solver.dx * cfg.solver.dx) + alpha / cfg.solver.dx);
        return static_cast<long>(std::ceil(cfg.solver.horizon / dt));
    };
    std::size_t curves = 1;
    switch (cfg.kind) {
        case Kind::Curve: o << "checks       " << (std::holds_alternative<env::ConstantV>(cfg.environment.v) ? "affine identity, " : "")
                            << (G.pieces.size() == 1 ? "convexity" : "none beyond the estimate") << "\n";
            break;
        case Kind::VerifyT11: {
            if (G.pieces.size() != 2) throw ConfigError("verify_t11 needs a Hamiltonian with exactly two pieces");
            const double gc = ham::eval(G, G.crossings[0]);
            o << "prediction   two-well, " << (cfg.beta >= gc ? "strong" : "weak") << " potential (G(p_hat) = " << gc
              << ")\n";
            o << "checks       prediction, plateau\n";
            curves = 3;
            break;
        }
        case Kind::VerifyT12:
            o << "prediction   " << G.pieces.size() - 1 << " pairwise predictions to assemble:";
            for (std::size_t i = 0; i + 1 < G.pieces.size(); ++i) o << " (" << i << "," << i + 1 << ")";
            o << "\nchecks       prediction, forms_agree\n";
            curves = G.pieces.size() + 1;
            break;
        case Kind::Commute:
            o << "checks       commute, three_piece_form\n";
            curves = 3;
            break;
        case Kind::CorrectorBands: o << "checks       bands (discounts:";
            for (double d : cfg.corrector.discounts) o << " " << d;
            o << "; local levels, extrapolated level on |x| <= " << cfg.corrector.window << ")\n";
            break;
        case Kind::Barriers: o << "checks       barriers (" << cfg.barriers.steps << " steps per seed)\n"; break;
        case Kind::WitnessSearch: o << "checks       witness_valid\n"; break;
    }
    if (!cfg.theta_grid.empty()) {
        o << "theta grid   " << cfg.theta_grid.size() << " points on [" << cfg.theta_grid.front() << ", "
          << cfg.theta_grid.back() << "]\n";
        if (cfg.kind != Kind::CorrectorBands) {
            long mx = 0;
            for (double th : cfg.theta_grid) mx = std::max(mx, steps(G, th));
            o << "solves       up to " << curves << " curves x " << cfg.theta_grid.size() << " slopes x "
              << cfg.seeds.size() << " seeds = " << curves * cfg.theta_grid.size() * cfg.seeds.size() << "\n";
            if (cfg.method == homog::Method::ParabolicSlope) o << "steps        at most " << mx << " per solve\n";
        }
    }
    return o.str();
}

void write_outputs(const Result& r, const std::string& out_dir) {
    const std::vector<std::pair<std::string, std::string>> meta{
        {"experiment", r.name}, {"config_hash", r.config_hash}, {"seeds", [&] {
             std::string s;
             for (std::size_t i = 0; i < r.seeds.size(); ++i) s += (i ? " " : "") + std::to_string(r.seeds[i]);
             return s;
         }()}};
    for (const auto& t : r.tables)
        report::write_file(out_dir + "/curves/" + table_file(r.name, t.name, r.tables.size()) + ".csv",
                           report::to_csv(t, meta));
    report::write_file(out_dir + "/reports/" + r.name + ".json", r.to_json().dump(2) + "\n");
    std::string lines;
    for (const auto& l : r.log) {
        json e = l;
        e["config_hash"] = r.config_hash;
        lines += e.dump() + "\n";
    }
    report::write_file(out_dir + "/logs/" + r.name + ".jsonl", lines);
    for (const auto& t : r.tables) {
        const auto* tp = &t;
        const Plot* plot = nullptr;
        for (const auto& p : r.plots)
            if (p.table == tp->name) plot = &p;
        Plot fallback{tp->name, tp->name, tp->name, tp->columns.front(), {tp->columns.size() > 1 ? tp->columns[1] : tp->columns.front()}, {}};
        if (!plot) plot = &fallback;
        auto col = [&](const std::string& c) {
            const auto it = std::find(tp->columns.begin(), tp->columns.end(), c);
            if (it == tp->columns.end()) return std::vector<double>{};
            const auto k = static_cast<std::size_t>(it - tp->columns.begin());
            std::vector<double> v;
            for (const auto& row : tp->rows) v.push_back(row[k]);
            return v;
        };
        std::vector<report::Series> ss;
        const auto x = col(plot->x);
        for (const auto& y : plot->y) {
            report::Series s{y, x, col(y)};
            s.dashed = std::find(plot->dashed.begin(), plot->dashed.end(), y) != plot->dashed.end();
            s.markers = y == "value";
            if (!s.y.empty()) ss.push_back(std::move(s));
        }
        std::string svg = report::render_svg(r.name + ": " + plot->title, plot->x, "value", ss);
        svg.insert(svg.find('>') + 1, "\n<!-- config_hash=" + r.config_hash + " -->");
        report::write_file(out_dir + "/plots/" + table_file(r.name, tp->name, r.tables.size()) + ".svg", svg);
    }
}

void write_error(const std::string& name, const std::string& config_hash, const std::string& kind,
                 const std::string& message, const std::string& out_dir) {
    json j{{"name", name}, {"config_hash", config_hash}, {"error", {{"kind", kind}, {"message", message}}}};
    report::write_file(out_dir + "/reports/" + name + "_error.json", j.dump(2) + "\n");
}

}  // namespace vhj::experiment
