#include "vhj/config.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include "vhj/errors.hpp"

namespace vhj::config {

using nlohmann::json;

namespace {

// Object view that records which keys were consumed so leftovers can be
// reported as unknown.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }

    std::string where(const std::string& key = {}) const {
        if (key.empty()) return "'" + path_ + "'";
        return "'" + (path_.empty() ? key : path_ + "." + key) + "'";
    }
    std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& at(const std::string& key) {
        seen_.insert(key);
        if (!j_.contains(key)) throw ConfigError("missing key " + where(key));
        return j_.at(key);
    }

    double num(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
        return v.get<double>();
    }
    double num(const std::string& key, double fallback) { return has(key) ? num(key) : fallback; }

    long integer(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
        return v.get<long>();
    }
    long integer(const std::string& key, long fallback) { return has(key) ? integer(key) : fallback; }

    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const auto& v = at(key);
        if (!v.is_boolean()) throw ConfigError(where(key) + " must be true or false");
        return v.get<bool>();
    }

    std::string str(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
        return v.get<std::string>();
    }
    std::string str(const std::string& key, const std::string& fallback) { return has(key) ? str(key) : fallback; }

    std::vector<double> numbers(const std::string& key) {
        const auto& v = at(key);
        if (!v.is_array()) throw ConfigError(where(key) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(where(key) + " must be an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError("unknown key " + where(it.key()));
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

env::GapLaw parse_gaps(const json& j, const std::string& path) {
    Obj o(j, path);
    const auto law = o.str("law");
    env::GapLaw g;
    if (law == "point_mass") g = env::PointMassGap{o.num("gap")};
    else if (law == "uniform") g = env::UniformGap{o.num("lo"), o.num("hi")};
    else if (law == "shifted_exp") g = env::ShiftedExpGap{o.num("min"), o.num("mean_excess")};
    else throw ConfigError(o.where("law") + ": unknown gap law '" + law + "'");
    o.finish();
    try {
        env::validate(g);
    } catch (const Error& e) {
        throw ConfigError(o.where() + ": " + e.what());
    }
    return g;
}

env::VModel parse_v(const json& j, const std::string& path) {
    Obj o(j, path);
    const auto model = o.str("model");
    env::VModel v;
    if (model == "constant") {
        v = env::ConstantV{o.num("level")};
    } else if (model == "periodic") {
        env::PeriodicV p;
        const auto prof = o.str("profile", "sine");
        if (prof == "sine") p.profile = env::PeriodicProfile::Sine;
        else if (prof == "triangle") p.profile = env::PeriodicProfile::Triangle;
        else throw ConfigError(o.where("profile") + ": expected 'sine' or 'triangle'");
        p.period = o.num("period", 1.0);
        p.phase = o.num("phase", 0.0);
        v = p;
    } else if (model == "renewal") {
        v = env::RenewalBernoulli{parse_gaps(o.at("gaps"), o.sub("gaps")), o.num("p", 0.5)};
    } else if (model == "reflected_bm") {
        v = env::ReflectedBM{o.num("mollifier_width", 0.0), o.num("sigma", 1.0)};
    } else if (model == "rigid_bump") {
        env::RigidBump r;
        r.bump_lipschitz = o.num("bump_lipschitz", 2.0);
        r.gaps = parse_gaps(o.at("gaps"), o.sub("gaps"));
        r.p = o.num("p", 0.5);
        v = r;
    } else if (model == "mollified") {
        v = env::MollifiedWrap{std::make_shared<const env::VModel>(parse_v(o.at("inner"), o.sub("inner"))),
                               o.num("width")};
    } else {
        throw ConfigError(o.where("model") + ": unknown potential model '" + model + "'");
    }
    o.finish();
    return v;
}

env::AModel parse_a(const json& j, const std::string& path) {
    Obj o(j, path);
    const auto model = o.str("model");
    env::AModel a;
    if (model == "constant") {
        a = env::ConstantA{o.num("level")};
    } else if (model == "degenerate") {
        a = env::DegenerateA{o.num("level", 0.5), o.num("period", 4.0), o.num("offset", 0.0), o.num("sqrt_slope", 1.0)};
    } else if (model == "sampled") {
        a = env::SampledA{std::make_shared<const env::VModel>(parse_v(o.at("inner"), o.sub("inner"))),
                          o.num("lo", 0.25), o.num("hi", 1.0)};
    } else {
        throw ConfigError(o.where("model") + ": unknown diffusion model '" + model + "'");
    }
    o.finish();
    return a;
}

ham::ConvexPiece parse_piece(const json& j, const std::string& path) {
    Obj o(j, path);
    ham::ConvexPiece g;
    g.well = o.num("well");
    const auto shape = o.str("shape", "power");
    if (shape == "power") {
        g.shape = ham::PowerWell{o.num("gamma", 2.0), o.num("scale", 0.5)};
    } else if (shape == "asymmetric") {
        g.shape = ham::AsymmetricPowerWell{o.num("gamma", 2.0), o.num("scale_left"), o.num("scale_right")};
    } else if (shape == "tabulated") {
        g.shape = ham::TabulatedConvex{o.numbers("knots"), o.numbers("values"), o.num("gamma", 2.0),
                                       o.num("ext_scale", 1.0)};
    } else {
        throw ConfigError(o.where("shape") + ": unknown piece shape '" + shape + "'");
    }
    o.finish();
    return g;
}

std::vector<double> parse_grid(const json& j, const std::string& path) {
    if (j.is_array()) {
        std::vector<double> g;
        for (const auto& x : j) {
            if (!x.is_number()) throw ConfigError("'" + path + "' must hold numbers");
            g.push_back(x.get<double>());
        }
        for (std::size_t i = 1; i < g.size(); ++i)
            if (!(g[i] > g[i - 1])) throw ConfigError("'" + path + "' must increase strictly");
        if (g.empty()) throw ConfigError("'" + path + "' must not be empty");
        return g;
    }
    Obj o(j, path);
    const double lo = o.num("min"), hi = o.num("max");
    const long n = o.integer("points");
    o.finish();
    if (n < 1) throw ConfigError(o.where("points") + " must be positive");
    if (n > 1 && !(hi > lo)) throw ConfigError(o.where() + ": max must exceed min");
    std::vector<double> g;
    for (long k = 0; k < n; ++k) g.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / (n - 1));
    return g;
}

std::vector<std::uint64_t> parse_seeds(const json& j, const std::string& path) {
    std::vector<std::uint64_t> s;
    if (j.is_array()) {
        for (const auto& x : j) {
            if (!x.is_number_unsigned()) throw ConfigError("'" + path + "' must hold nonnegative integers");
            s.push_back(x.get<std::uint64_t>());
        }
    } else {
        Obj o(j, path);
        const long first = o.integer("first", 1);
        const long count = o.integer("count");
        o.finish();
        if (first < 0 || count < 1) throw ConfigError(o.where() + ": need first >= 0 and count >= 1");
        for (long k = 0; k < count; ++k) s.push_back(static_cast<std::uint64_t>(first + k));
    }
    if (s.empty()) throw ConfigError("'" + path + "' must list at least one seed");
    return s;
}

Kind parse_kind(const std::string& s, const std::string& where) {
    if (s == "curve") return Kind::Curve;
    if (s == "verify_t11") return Kind::VerifyT11;
    if (s == "verify_t12") return Kind::VerifyT12;
    if (s == "commute") return Kind::Commute;
    if (s == "corrector_bands") return Kind::CorrectorBands;
    if (s == "barriers") return Kind::Barriers;
    if (s == "witness_search") return Kind::WitnessSearch;
    throw ConfigError(where + ": unknown experiment kind '" + s + "'");
}

void check_positive(double v, const std::string& what) {
    if (!(v > 0.0)) throw ConfigError("tolerance '" + what + "' must be positive");
}

Tolerances parse_tolerances(const json& j) {
    Obj o(j, "tolerances");
    Tolerances t;
    t.exact = o.num("exact", t.exact);
    t.prediction = o.num("prediction", t.prediction);
    t.plateau = o.num("plateau", t.plateau);
    t.commute = o.num("commute", t.commute);
    t.convexity = o.num("convexity", t.convexity);
    t.flat_root = o.num("flat_root", t.flat_root);
    t.band_fraction = o.num("band_fraction", t.band_fraction);
    t.band_slack = o.num("band_slack", t.band_slack);
    t.band_margin = o.num("band_margin", t.band_margin);
    t.multiwell_forms = o.num("multiwell_forms", t.multiwell_forms);
    o.finish();
    for (auto [v, n] : {std::pair{t.exact, "exact"}, {t.prediction, "prediction"}, {t.plateau, "plateau"},
                        {t.commute, "commute"}, {t.convexity, "convexity"}, {t.flat_root, "flat_root"},
                        {t.band_fraction, "band_fraction"}, {t.band_slack, "band_slack"},
                        {t.band_margin, "band_margin"}, {t.multiwell_forms, "multiwell_forms"}})
        check_positive(v, n);
    if (t.band_fraction > 1.0) throw ConfigError("tolerance 'band_fraction' must not exceed 1");
    return t;
}

// Line and column of a byte offset in text (both 1-based).
std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

}  // namespace

const char* to_string(Kind k) {
    switch (k) {
        case Kind::Curve: return "curve";
        case Kind::VerifyT11: return "verify_t11";
        case Kind::VerifyT12: return "verify_t12";
        case Kind::Commute: return "commute";
        case Kind::CorrectorBands: return "corrector_bands";
        case Kind::Barriers: return "barriers";
        case Kind::WitnessSearch: return "witness_search";
    }
    return "?";
}

env::EnvModel parse_environment(const json& j, const std::string& path) {
    Obj o(j, path);
    env::EnvModel m;
    m.v = parse_v(o.at("v"), o.sub("v"));
    if (o.has("a")) m.a = parse_a(o.at("a"), o.sub("a"));
    o.finish();
    return m;
}

ham::HamiltonianSpec parse_hamiltonian(const json& j, const std::string& path) {
    Obj o(j, path);
    try {
        ham::HamiltonianSpec spec;
        if (o.has("preset")) {
            const auto preset = o.str("preset");
            const double gamma = o.num("gamma", 2.0), scale = o.num("scale", 0.5);
            if (preset == "two_well") {
                spec = ham::power_two_well(o.num("c_minus"), o.num("c_plus"), gamma, scale);
            } else if (preset == "multi_well") {
                spec = ham::power_multi_well(o.numbers("wells"), gamma, scale);
            } else if (preset == "power") {
                spec = ham::power_multi_well({o.num("well", 0.0)}, gamma, scale);
            } else if (preset == "abs") {
                spec = ham::make_spec({ham::ConvexPiece{o.num("well", 0.0), ham::PowerWell{1.0, o.num("scale", 1.0)}}},
                                      0.5, 2.0, 1.0);
            } else if (preset == "convexified_two_well") {
                const auto two = ham::power_two_well(o.num("c_minus"), o.num("c_plus"), gamma, scale);
                const double lo = o.num("table_min", -6.0), hi = o.num("table_max", 6.0);
                const long n = o.integer("table_points", 1201);
                if (n < 3) throw ConfigError(o.where("table_points") + " must be at least 3");
                spec = ham::make_spec({ham::tabulate_two_well_convexification(two, lo, hi, static_cast<std::size_t>(n))},
                                      two.alpha0, two.alpha1, two.gamma);
            } else {
                throw ConfigError(o.where("preset") + ": unknown preset '" + preset + "'");
            }
        } else {
            const auto& arr = o.at("pieces");
            if (!arr.is_array() || arr.empty()) throw ConfigError(o.where("pieces") + " must be a non-empty array");
            std::vector<ham::ConvexPiece> pieces;
            for (std::size_t i = 0; i < arr.size(); ++i)
                pieces.push_back(parse_piece(arr[i], o.sub("pieces") + "[" + std::to_string(i) + "]"));
            spec = ham::make_spec(std::move(pieces), o.num("alpha0", 0.1), o.num("alpha1", 10.0), o.num("gamma", 2.0));
        }
        spec.id = o.str("id", spec.id.empty() ? ham::describe(spec) : spec.id);
        o.finish();
        return spec;
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(o.where() + ": " + e.what());
    }
}

pde::SolverConfig parse_solver(const json& j, const std::string& path) {
    Obj o(j, path);
    pde::SolverConfig c;
    c.dx = o.num("dx", c.dx);
    c.cfl_safety = o.num("cfl_safety", c.cfl_safety);
    c.horizon = o.num("horizon", c.horizon);
    c.domain_margin = o.num("domain_margin", c.domain_margin);
    c.lf_dissipation = o.num("lf_dissipation", c.lf_dissipation);
    c.lipschitz_cap = o.num("lipschitz_cap", c.lipschitz_cap);
    c.dt = o.num("dt", c.dt);
    if (o.has("output_times")) c.output_times = o.numbers("output_times");
    c.tail_points = static_cast<std::size_t>(o.integer("tail_points", static_cast<long>(c.tail_points)));
    c.light_cone = o.boolean("light_cone", c.light_cone);
    c.solve_tol = o.num("solve_tol", c.solve_tol);
    c.max_iterations = static_cast<std::size_t>(o.integer("max_iterations", static_cast<long>(c.max_iterations)));
    c.width_factor = o.num("width_factor", c.width_factor);
    o.finish();
    if (!(c.dx > 0.0)) throw ConfigError(o.where("dx") + " must be positive");
    if (!(c.cfl_safety > 0.0 && c.cfl_safety <= 1.0)) throw ConfigError(o.where("cfl_safety") + " must lie in (0, 1]");
    if (!(c.horizon > 0.0)) throw ConfigError(o.where("horizon") + " must be positive");
    if (c.dt < 0.0) throw ConfigError(o.where("dt") + " must be nonnegative");
    return c;
}

ExperimentConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        std::string msg = e.what();
        if (const auto p = msg.find("syntax error"); p != std::string::npos) msg = msg.substr(p);
        throw ConfigError("config parse error at line " + std::to_string(line) + ", column " + std::to_string(col) +
                          ": " + msg);
    }
    Obj o(doc, "");
    ExperimentConfig cfg;
    cfg.version = static_cast<int>(o.integer("version"));
    if (cfg.version != kConfigVersion)
        throw ConfigError("unsupported config version " + std::to_string(cfg.version) + " (expected " +
                          std::to_string(kConfigVersion) + ")");
    cfg.name = o.str("name", "experiment");
    cfg.kind = parse_kind(o.str("kind"), "'kind'");
    cfg.beta = o.num("beta", 0.0);
    if (cfg.beta < 0.0) throw ConfigError("'beta' must be nonnegative");
    cfg.environment = parse_environment(o.at("environment"));
    cfg.solver = o.has("solver") ? parse_solver(o.at("solver")) : pde::SolverConfig{};
    cfg.seeds = o.has("seeds") ? parse_seeds(o.at("seeds"), "seeds") : std::vector<std::uint64_t>{1};
    cfg.output_dir = o.str("output_dir", cfg.output_dir);
    if (o.has("tolerances")) cfg.tolerances = parse_tolerances(o.at("tolerances"));

    const bool needs_ham = cfg.kind != Kind::WitnessSearch;
    if (needs_ham || o.has("hamiltonian")) cfg.hamiltonian = parse_hamiltonian(o.at("hamiltonian"));
    const bool needs_grid = cfg.kind != Kind::Barriers && cfg.kind != Kind::WitnessSearch;
    if (needs_grid || o.has("theta_grid")) cfg.theta_grid = parse_grid(o.at("theta_grid"), "theta_grid");

    if (o.has("method")) {
        const auto m = o.str("method");
        if (m == "parabolic_slope") cfg.method = homog::Method::ParabolicSlope;
        else if (m == "discounted_limit") cfg.method = homog::Method::DiscountedLimit;
        else throw ConfigError("'method': expected 'parabolic_slope' or 'discounted_limit'");
    }
    if (o.has("plateau_interval")) {
        const auto v = o.numbers("plateau_interval");
        if (v.size() != 2 || !(v[0] <= v[1])) throw ConfigError("'plateau_interval' must be [lo, hi] with lo <= hi");
        cfg.plateau_interval = std::pair{v[0], v[1]};
    }
    if (o.has("corrector")) {
        Obj c(o.at("corrector"), "corrector");
        cfg.corrector.piece = static_cast<std::size_t>(c.integer("piece", 0));
        if (c.has("discounts")) cfg.corrector.discounts = c.numbers("discounts");
        if (c.has("p_hat")) cfg.corrector.p_hat = c.num("p_hat");
        cfg.corrector.window = c.num("window", cfg.corrector.window);
        if (!(cfg.corrector.window > 0.0)) throw ConfigError("'corrector.window' must be positive");
        const auto side = c.str("p_hat_side", "below");
        if (side != "below" && side != "above") throw ConfigError("'corrector.p_hat_side' must be below or above");
        cfg.corrector.phat_below = side == "below";
        c.finish();
        if (cfg.corrector.discounts.empty()) throw ConfigError("'corrector.discounts' must not be empty");
        for (std::size_t i = 0; i < cfg.corrector.discounts.size(); ++i)
            if (!(cfg.corrector.discounts[i] > 0.0) || (i > 0 && !(cfg.corrector.discounts[i] < cfg.corrector.discounts[i - 1])))
                throw ConfigError("'corrector.discounts' must be positive and decreasing");
    }
    if (o.has("barriers")) {
        Obj b(o.at("barriers"), "barriers");
        auto& B = cfg.barriers;
        B.theta = b.num("theta", B.theta);
        B.eps = b.num("eps", B.eps);
        B.hill_h = b.num("hill_h", B.hill_h);
        B.valley_h = b.num("valley_h", B.valley_h);
        B.y = b.num("y", B.y);
        B.c = b.num("c", B.c);
        B.steps = b.integer("steps", B.steps);
        B.half_width = b.num("half_width", B.half_width);
        b.finish();
    }
    if (o.has("witness")) {
        Obj w(o.at("witness"), "witness");
        auto& W = cfg.witness;
        W.h = w.num("h", W.h);
        W.y = w.num("y", W.y);
        const auto k = w.str("kind", "hill");
        if (k == "hill") W.kind = env::WitnessKind::Hill;
        else if (k == "valley") W.kind = env::WitnessKind::Valley;
        else throw ConfigError("'witness.kind' must be hill or valley");
        W.delta_min = w.num("delta_min", W.delta_min);
        W.half_width = w.num("half_width", W.half_width);
        w.finish();
    }
    o.finish();
    cfg.canonical = doc;
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_hash(const ExperimentConfig& cfg) {
    const std::string s = cfg.canonical.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void apply_seed_offset(ExperimentConfig& cfg, std::uint64_t offset) {
    if (offset == 0) return;
    for (auto& s : cfg.seeds) s += offset;
    cfg.canonical["seeds"] = cfg.seeds;
}

}  // namespace vhj::config
