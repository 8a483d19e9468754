// vhj: batch front end for effective Hamiltonian experiments.
//
//   vhj run --config cfg.json [--out DIR] [--workers N] [--seed-offset K]
//   vhj describe --config cfg.json
//   vhj seed-sweep --config cfg.json --sweeps M [--out DIR] [--workers N]
//
// Exit status: 0 when every configured check passes, 1 when a check fails,
// 2 on configuration or solver errors.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "vhj/config.hpp"
#include "vhj/errors.hpp"
#include "vhj/experiment.hpp"
#include "vhj/report.hpp"

namespace {

struct Options {
    std::string config;
    std::string out;
    unsigned workers = 1;
    std::uint64_t seed_offset = 0;
    int sweeps = 3;
    bool quiet = false;
};

int fail(const std::string& name, const std::string& hash, const std::string& kind, const std::string& msg,
         const std::string& out) {
    std::cerr << "error [" << kind << "]: " << msg << "\n";
    if (!out.empty() && !name.empty()) {
        try {
            vhj::experiment::write_error(name, hash, kind, msg, out);
        } catch (const std::exception&) {
        }
    }
    return 2;
}

void print_checks(const vhj::experiment::Result& r) {
    for (const auto& c : r.checks)
        std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << "  value=" << vhj::report::fmt(c.value)
                  << " tol=" << vhj::report::fmt(c.tolerance) << (c.detail.empty() ? "" : "  (" + c.detail + ")")
                  << "\n";
}

int cmd_run(const Options& o) {
    vhj::config::ExperimentConfig cfg;
    try {
        cfg = vhj::config::load_config(o.config);
    } catch (const vhj::Error& e) {
        return fail({}, {}, e.kind(), e.what(), {});
    }
    vhj::config::apply_seed_offset(cfg, o.seed_offset);
    const std::string out = o.out.empty() ? cfg.output_dir : o.out;
    const auto hash = vhj::config::config_hash(cfg);
    try {
        auto progress = [&](const std::string& m) {
            if (!o.quiet) std::cerr << "[" << cfg.name << "] " << m << "\n";
        };
        const auto r = vhj::experiment::run(cfg, o.workers, progress);
        vhj::experiment::write_outputs(r, out);
        print_checks(r);
        std::cout << (r.passed() ? "passed" : "failed") << ": " << cfg.name << " -> " << out << "\n";
        return r.passed() ? 0 : 1;
    } catch (const vhj::Error& e) {
        return fail(cfg.name, hash, e.kind(), e.what(), out);
    }
}

int cmd_describe(const Options& o) {
    try {
        auto cfg = vhj::config::load_config(o.config);
        vhj::config::apply_seed_offset(cfg, o.seed_offset);
        std::cout << vhj::experiment::describe(cfg);
        return 0;
    } catch (const vhj::Error& e) {
        return fail({}, {}, e.kind(), e.what(), {});
    }
}

int cmd_sweep(const Options& o) {
    vhj::config::ExperimentConfig base;
    try {
        base = vhj::config::load_config(o.config);
    } catch (const vhj::Error& e) {
        return fail({}, {}, e.kind(), e.what(), {});
    }
    const std::string out = o.out.empty() ? base.output_dir : o.out;
    const std::uint64_t stride = base.seeds.size();
    nlohmann::json sweep = nlohmann::json::array();
    bool all = true;
    for (int k = 0; k < o.sweeps; ++k) {
        auto cfg = base;
        vhj::config::apply_seed_offset(cfg, o.seed_offset + stride * static_cast<std::uint64_t>(k));
        cfg.name = base.name + "_sweep" + std::to_string(k);
        try {
            const auto r = vhj::experiment::run(cfg, o.workers, [&](const std::string& m) {
                if (!o.quiet) std::cerr << "[" << cfg.name << "] " << m << "\n";
            });
            vhj::experiment::write_outputs(r, out);
            nlohmann::json checks = nlohmann::json::object();
            for (const auto& c : r.checks) checks[c.name] = {{"pass", c.pass}, {"value", c.value}};
            sweep.push_back({{"sweep", k}, {"seeds", cfg.seeds}, {"config_hash", r.config_hash},
                             {"passed", r.passed()}, {"checks", checks}});
            all = all && r.passed();
            std::cout << (r.passed() ? "passed" : "failed") << ": " << cfg.name << "\n";
        } catch (const vhj::Error& e) {
            return fail(cfg.name, vhj::config::config_hash(cfg), e.kind(), e.what(), out);
        }
    }
    nlohmann::json summary{{"name", base.name}, {"config_hash", vhj::config::config_hash(base)}, {"sweeps", sweep}};
    vhj::report::write_file(out + "/reports/" + base.name + "_sweep.json", summary.dump(2) + "\n");
    return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Effective Hamiltonians of viscous Hamilton-Jacobi equations in random media"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed-offset", o.seed_offset, "added to every seed");
    };
    auto* run = app.add_subcommand("run", "run an experiment and write its artifacts");
    common(run);
    run->add_option("--out", o.out, "output directory (default: config output_dir)");
    run->add_option("--workers", o.workers, "worker threads (0 = all cores)");
    run->add_flag("--quiet", o.quiet, "no progress messages");
    auto* describe = app.add_subcommand("describe", "print the resolved plan without computing");
    common(describe);
    auto* sweep = app.add_subcommand("seed-sweep", "rerun with disjoint seed blocks");
    common(sweep);
    sweep->add_option("--out", o.out, "output directory (default: config output_dir)");
    sweep->add_option("--workers", o.workers, "worker threads (0 = all cores)");
    sweep->add_option("--sweeps", o.sweeps, "number of seed blocks")->check(CLI::PositiveNumber);
    sweep->add_flag("--quiet", o.quiet, "no progress messages");
    CLI11_PARSE(app, argc, argv);
    if (run->parsed()) return cmd_run(o);
    if (describe->parsed()) return cmd_describe(o);
    return cmd_sweep(o);
}
