#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gridtrack/harness.hpp"

namespace py = pybind11;
using namespace gridtrack;

namespace {

RunConfig make_config(const std::string& mode, double tau, double alpha, double t0,
                      double t_end, std::uint64_t seed, bool prediction,
                      const std::string& step_mode) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.tau = tau;
  cfg.alpha = alpha;
  cfg.t0 = t0;
  cfg.t_end = t_end;
  cfg.seed = seed;
  cfg.prediction = prediction;
  if (step_mode == "per-agent")
    cfg.step_mode = StepMode::kPerAgent;
  else if (step_mode == "global-min")
    cfg.step_mode = StepMode::kGlobalMin;
  else
    throw ValidationError("unknown step mode: " + step_mode);
  return cfg;
}

py::dict trajectory_dict(const Trajectory& traj) {
  std::vector<double> t, obj, kkt, ap, ad, wall;
  std::vector<long> msgs;
  for (const auto& s : traj.samples) {
    t.push_back(s.t);
    obj.push_back(s.objective);
    kkt.push_back(s.kkt_error);
    ap.push_back(s.alpha_p);
    ad.push_back(s.alpha_d);
    wall.push_back(s.wall_ms);
    msgs.push_back(s.msgs);
  }
  py::dict d;
  d["t"] = t;
  d["objective"] = obj;
  d["kkt_error"] = kkt;
  d["alpha_p"] = ap;
  d["alpha_d"] = ad;
  d["wall_ms"] = wall;
  d["msgs"] = msgs;
  return d;
}

}  // namespace

PYBIND11_MODULE(_gridtrack, m) {
  m.doc() = "online decentralized tracking for time-varying optimal power flow";

  py::register_exception<ParseError>(m, "GridParseError");
  py::register_exception<ValidationError>(m, "GridValidationError");
  py::register_exception<SolverError>(m, "GridSolverError");
  py::register_exception<ProtocolError>(m, "GridProtocolError");

  py::class_<Network>(m, "Network")
      .def_property_readonly("num_ts_buses",
                             [](const Network& n) { return n.ts.buses.size(); })
      .def_property_readonly("num_ds",
                             [](const Network& n) { return n.ds.size(); })
      .def_property_readonly("num_ties",
                             [](const Network& n) { return n.ties.size(); });

  py::class_<Scenario, std::shared_ptr<Scenario>>(m, "Scenario")
      .def_property_readonly("t_start", &Scenario::t_start)
      .def_property_readonly("t_end", &Scenario::t_end)
      .def("save", &Scenario::save_file, py::arg("path"));

  m.def("load_case", &load_case, py::arg("path"));
  m.def("load_scenario",
        [](const std::string& path) {
          return std::make_shared<Scenario>(Scenario::load_file(path));
        },
        py::arg("path"));
  m.def("make_synthetic_scenario",
        [](const Network& net, const std::string& shape, double noise,
           std::uint64_t seed, double t0, double t_end, double knot_dt) {
          return std::make_shared<Scenario>(Scenario::make_synthetic(
              net, shape, noise, seed, t0, t_end, knot_dt));
        },
        py::arg("net"), py::arg("shape") = "noon-peak", py::arg("noise") = 0.02,
        py::arg("seed") = 0, py::arg("t0") = 0.0, py::arg("t_end") = 60.0,
        py::arg("knot_dt") = 5.0);

  m.def("solve",
        [](const Network& net, std::shared_ptr<Scenario> sc, double t) {
          auto p = make_problem(net, sc);
          SolveResult res = solve_converged(*p, t);
          py::dict d;
          d["converged"] = res.converged;
          d["iterations"] = res.iterations;
          d["objective"] = p->objective(res.state.x, t);
          d["kkt_error"] = kkt_error(*p, res.state, t);
          return d;
        },
        py::arg("net"), py::arg("scenario"), py::arg("t"));

  m.def("run",
        [](const Network& net, std::shared_ptr<Scenario> sc,
           const std::string& mode, double tau, double alpha, double t0,
           double t_end, std::uint64_t seed, bool prediction,
           const std::string& step_mode) {
          RunConfig cfg = make_config(mode, tau, alpha, t0, t_end, seed,
                                      prediction, step_mode);
          return trajectory_dict(run_mode(net, sc, cfg));
        },
        py::arg("net"), py::arg("scenario"), py::arg("mode") = "centralized",
        py::arg("tau") = 0.02, py::arg("alpha") = 0.0, py::arg("t0") = 0.0,
        py::arg("t_end") = 1.0, py::arg("seed") = 0, py::arg("prediction") = true,
        py::arg("step_mode") = "per-agent");

  m.def("verify_equivalence",
        [](const Network& net, std::shared_ptr<Scenario> sc, double t,
           std::uint64_t seed) {
          EquivalenceReport rep = verify_equivalence(net, sc, t, seed);
          py::dict d;
          d["pass"] = rep.pass;
          d["max_rel_dev"] = rep.max_rel_dev;
          d["num_vars"] = rep.num_vars;
          return d;
        },
        py::arg("net"), py::arg("scenario"), py::arg("t"), py::arg("seed") = 0);

  m.def("sweep_tau",
        [](const Network& net, std::shared_ptr<Scenario> sc,
           const std::vector<double>& taus, const std::string& mode, double t0,
           double t_end) {
          RunConfig cfg;
          cfg.mode = mode;
          cfg.t0 = t0;
          cfg.t_end = t_end;
          std::vector<py::dict> out;
          for (const auto& p : sweep_tau(net, sc, cfg, taus)) {
            py::dict d;
            d["tau"] = p.tau;
            d["mean_rel_err"] = p.mean_rel_err;
            d["max_rel_err"] = p.max_rel_err;
            out.push_back(std::move(d));
          }
          return out;
        },
        py::arg("net"), py::arg("scenario"), py::arg("taus"),
        py::arg("mode") = "centralized", py::arg("t0") = 0.0,
        py::arg("t_end") = 1.0);
}
