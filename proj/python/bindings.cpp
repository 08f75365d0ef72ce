#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "treecascade/cascade.hpp"
#include "treecascade/flow.hpp"
#include "treecascade/flow_io.hpp"
#include "treecascade/kpz.hpp"
#include "treecascade/regularity.hpp"
#include "treecascade/sde.hpp"
#include "treecascade/transport.hpp"
#include "treecascade/verify.hpp"

namespace py = pybind11;
using namespace treecascade;

namespace {

std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

WeightSpec make_spec(const std::string& kind, double rate, double jump_mean, double jump_sd) {
  WeightSpec s;
  if (kind == "gaussian") s = WeightSpec::gaussian();
  else if (kind == "compound_poisson") s = WeightSpec::compound_poisson(rate, jump_mean, jump_sd);
  else throw std::invalid_argument("weights must be 'gaussian' or 'compound_poisson'");
  s.validate();
  return s;
}

py::dict transport_dict(const TransportResult& r) {
  py::dict d;
  d["method"] = to_string(r.method);
  d["value"] = r.value;
  d["truncation_bound"] = r.truncation_bound;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multiplicative cascades on the binary tree";

  py::class_<Flow>(m, "Flow")
      .def(py::init([](const std::vector<std::vector<double>>& levels) {
             return Flow::from_levels(levels);
           }),
           py::arg("levels"))
      .def_static("from_leaves",
                  [](const std::vector<double>& leaves) { return Flow::from_leaves(leaves); })
      .def_static("uniform", &uniform_flow, py::arg("depth"))
      .def_static("load", &load_flow, py::arg("path"))
      .def("save", [](const Flow& f, const std::string& path) { save_flow(path, f); })
      .def_property_readonly("depth", &Flow::depth)
      .def_property_readonly("root_mass", &Flow::root_mass)
      .def("level", [](const Flow& f, int k) { return to_vector(f.level(k)); })
      .def("leaves", [](const Flow& f) { return to_vector(f.leaves()); })
      .def("truncated", &Flow::truncated)
      .def("normalized", [](const Flow& f) { return normalize(f); })
      .def("is_consistent", [](const Flow& f) { return is_consistent_measure(f); })
      .def("to_json", [](const Flow& f) { return flow_to_json(f).dump(); })
      .def("__eq__", [](const Flow& a, const Flow& b) { return a == b; })
      .def("__repr__", [](const Flow& f) {
        return "Flow(depth=" + std::to_string(f.depth()) +
               ", root_mass=" + format_double(f.root_mass()) + ")";
      });

  m.def(
      "simulate",
      [](const Flow& base, double t_end, double step, std::uint64_t seed,
         const std::string& weights, double rate, double jump_mean, double jump_sd, int depth) {
        const WeightSpec spec = make_spec(weights, rate, jump_mean, jump_sd);
        const int d = depth < 0 ? base.depth() : depth;
        PathOptions opts;
        opts.keep_weight_state = false;
        py::gil_scoped_release release;
        const auto path = simulate_path(base, spec, uniform_grid(t_end, step), d, seed, opts);
        std::vector<double> times;
        for (std::size_t i = 0; i < path.size(); ++i) times.push_back(path.time(i));
        return std::make_pair(times, path.snapshots);
      },
      py::arg("base"), py::arg("t_end"), py::arg("step") = 0.01, py::arg("seed") = 42,
      py::arg("weights") = "gaussian", py::arg("rate") = 1.0, py::arg("jump_mean") = 0.0,
      py::arg("jump_sd") = 0.3, py::arg("depth") = -1,
      "Returns (times, snapshots) for one cascade path.");

  m.def("overlap", &overlap, py::arg("flow"));

  m.def(
      "regularity_report",
      [](double t, const std::vector<double>& h_values, const std::string& weights) {
        const auto report = regularity_report(PressureModel::theta(),
                                              make_spec(weights, 1.0, 0.0, 0.3), t, h_values);
        return to_json(report).dump();
      },
      py::arg("t"), py::arg("h_values"), py::arg("weights") = "gaussian",
      "Regularity analytics for the uniform measure as a JSON string.");

  m.def("wasserstein_exact",
        [](const Flow& a, const Flow& b) { return transport_dict(wasserstein_exact(a, b)); });
  m.def("wasserstein_lp",
        [](const Flow& a, const Flow& b) { return transport_dict(wasserstein_lp_oracle(a, b)); });
  m.def("coupling_upper_bound",
        [](const Flow& a, const Flow& b) { return transport_dict(coupling_upper_bound(a, b)); });

  m.def(
      "kpz_solve",
      [](double d0, double t_end, double step) {
        const auto p = kpz_ode_solve(d0, t_end, step);
        return std::make_pair(p.times, p.d);
      },
      py::arg("d0"), py::arg("t_end"), py::arg("step") = 1e-3);
  m.def("kpz_closed_form", &kpz_closed_form, py::arg("d0"), py::arg("t"));

  m.def("registered_tests", &registered_tests);
  m.def(
      "run_suite",
      [](const std::string& config_json) {
        const SuiteConfig cfg = suite_config_from_json(nlohmann::json::parse(config_json));
        std::vector<TestReport> reports;
        {
          py::gil_scoped_release release;
          reports = run_suite(cfg);
        }
        return suite_report_json(cfg, reports).dump();
      },
      py::arg("config_json") = "{}", "Runs the verification suite; returns the JSON report.");
}
