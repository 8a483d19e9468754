#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "json.hpp"
#include "vhj/config.hpp"
#include "vhj/env.hpp"
#include "vhj/errors.hpp"
#include "vhj/experiment.hpp"
#include "vhj/ham.hpp"
#include "vhj/homog.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace vhj;

namespace {

py::array_t<double> array(const std::vector<double>& v) { return py::array_t<double>(v.size(), v.data()); }

env::WitnessKind witness_kind(const std::string& k) {
    if (k == "hill") return env::WitnessKind::Hill;
    if (k == "valley") return env::WitnessKind::Valley;
    throw ParameterError("witness kind must be 'hill' or 'valley', got '" + k + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "C++ core of vhjlab; the package wraps these with dict-based helpers.";

    // later registrations are tried first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def(
        "run",
        [](const std::string& config, unsigned workers, const std::string& out_dir) {
            const auto cfg = config::parse_config(config);
            py::gil_scoped_release release;
            const auto r = experiment::run(cfg, workers);
            if (!out_dir.empty()) experiment::write_outputs(r, out_dir);
            return r.to_json().dump();
        },
        py::arg("config"), py::arg("workers") = 1, py::arg("out_dir") = "",
        "Run a JSON config; returns the report as JSON text and writes artifacts when out_dir is set.");
    m.def("describe", [](const std::string& config) { return experiment::describe(config::parse_config(config)); });
    m.def("config_hash", [](const std::string& config) { return config::config_hash(config::parse_config(config)); });

    py::class_<ham::HamiltonianSpec>(m, "Hamiltonian")
        .def(py::init([](const std::string& spec) { return config::parse_hamiltonian(json::parse(spec)); }))
        .def("__call__", [](const ham::HamiltonianSpec& G, double p) { return ham::eval(G, p); })
        .def("__call__",
             [](const ham::HamiltonianSpec& G, py::array_t<double> p) {
                 return py::vectorize([&G](double q) { return ham::eval(G, q); })(p);
             })
        .def("deriv", [](const ham::HamiltonianSpec& G, double p) { return ham::deriv(G, p); })
        .def_property_readonly("wells",
                               [](const ham::HamiltonianSpec& G) {
                                   std::vector<double> w;
                                   for (const auto& g : G.pieces) w.push_back(g.well);
                                   return w;
                               })
        .def_readonly("crossings", &ham::HamiltonianSpec::crossings)
        .def_readonly("id", &ham::HamiltonianSpec::id)
        .def("__repr__", [](const ham::HamiltonianSpec& G) { return "<Hamiltonian " + ham::describe(G) + ">"; });

    py::class_<env::Environment>(m, "Environment")
        .def_readonly("seed", &env::Environment::seed)
        .def_readonly("dx", &env::Environment::dx)
        .def_readonly("kappa", &env::Environment::kappa)
        .def_property_readonly("x",
                               [](const env::Environment& e) {
                                   std::vector<double> x(e.size());
                                   for (std::size_t i = 0; i < x.size(); ++i) x[i] = e.x(i);
                                   return array(x);
                               })
        .def_property_readonly("v", [](const env::Environment& e) { return array(e.v_values); })
        .def_property_readonly("a", [](const env::Environment& e) { return array(e.a_values); })
        .def("__len__", &env::Environment::size);

    m.def(
        "sample_environment",
        [](const std::string& model, double lo, double hi, double dx, std::uint64_t seed) {
            return env::sample_environment(config::parse_environment(json::parse(model)), lo, hi, dx, seed);
        },
        py::arg("model"), py::arg("lo"), py::arg("hi"), py::arg("dx"), py::arg("seed"));

    m.def(
        "find_witness",
        [](const env::Environment& e, double h, double y, const std::string& kind, double delta_min) -> py::object {
            const auto w = env::find_witness(e, h, y, witness_kind(kind), {delta_min});
            if (!w) return py::none();
            py::dict d;
            d["l1"] = w->l1;
            d["l2"] = w->l2;
            d["delta"] = w->delta;
            d["scaled_length"] = env::scaled_length(e, w->l1, w->l2, w->delta);
            d["valid"] = env::validate_witness(e, *w);
            return std::move(d);
        },
        py::arg("env"), py::arg("h"), py::arg("y"), py::arg("kind") = "hill", py::arg("delta_min") = 1e-3);

    m.def(
        "estimate",
        [](const std::string& model, const ham::HamiltonianSpec& G, double beta, double theta,
           const std::vector<std::uint64_t>& seeds, const std::string& solver, unsigned workers) {
            const auto cfg = config::parse_solver(json::parse(solver));
            homog::EffectiveEstimate est;
            {
                py::gil_scoped_release release;
                const std::vector<double> grid{theta};
                const double hw = homog::ensemble_half_width(G, beta, grid, cfg);
                const auto ens =
                    homog::sample_ensemble(config::parse_environment(json::parse(model)), seeds, hw, cfg.dx, workers);
                est = homog::estimate_point(ens, G, beta, theta, cfg, workers);
            }
            py::dict d;
            d["theta"] = est.theta;
            d["value"] = est.value;
            d["std_error"] = est.std_error;
            std::vector<double> per;
            for (const auto& r : est.runs) per.push_back(r.value);
            d["runs"] = per;
            return d;
        },
        py::arg("model"), py::arg("hamiltonian"), py::arg("beta"), py::arg("theta"), py::arg("seeds"),
        py::arg("solver"), py::arg("workers") = 1,
        "Ensemble estimate of the effective Hamiltonian at one slope (parabolic method).");
}
