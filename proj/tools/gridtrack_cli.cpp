#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gridtrack/harness.hpp"

namespace fs = std::filesystem;
using namespace gridtrack;

namespace {

std::map<std::string, std::string> config_echo(const RunConfig& cfg,
                                               const std::string& case_path,
                                               const std::string& scenario_path) {
  return {{"mode", cfg.mode},
          {"case", case_path},
          {"scenario", scenario_path},
          {"tau", std::to_string(cfg.tau)},
          {"alpha", std::to_string(cfg.alpha)},
          {"t0", std::to_string(cfg.t0)},
          {"t_end", std::to_string(cfg.t_end)},
          {"seed", std::to_string(cfg.seed)},
          {"prediction", cfg.prediction ? "on" : "off"},
          {"step_mode",
           cfg.step_mode == StepMode::kPerAgent ? "per-agent" : "global-min"}};
}

void write_run(const fs::path& out_dir, const std::string& name,
               const Trajectory& traj, const Trajectory* oracle,
               const std::map<std::string, std::string>& echo) {
  fs::create_directories(out_dir);
  write_csv((out_dir / (name + ".csv")).string(), traj, oracle);
  MetricsSummary m = oracle ? compute_metrics(traj, *oracle) : compute_metrics(traj);
  write_summary_json((out_dir / (name + "_summary.json")).string(), m, echo);
}

struct CommonArgs {
  std::string case_path, scenario_path, out_dir = "out";
  RunConfig cfg;
  bool no_prediction = false;
  std::string step_mode = "per-agent";

  void add_run_flags(CLI::App* cmd, bool need_scenario) {
    cmd->add_option("--case", case_path, "case file")->required();
    auto* sc = cmd->add_option("--scenario", scenario_path, "scenario file");
    if (need_scenario) sc->required();
    cmd->add_option("--tau", cfg.tau, "sampling period");
    cmd->add_option("--alpha", cfg.alpha, "correction gain (0 = 1/tau)");
    cmd->add_option("--t0", cfg.t0, "start time");
    cmd->add_option("--t-end", cfg.t_end, "end time");
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_flag("--no-prediction", no_prediction, "disable the prediction term");
    cmd->add_option("--step-mode", step_mode, "per-agent or global-min")
        ->check(CLI::IsMember({"per-agent", "global-min"}));
    cmd->add_option("--out", out_dir, "output directory");
  }

  void finalize() {
    cfg.prediction = !no_prediction;
    cfg.step_mode = step_mode == "global-min" ? StepMode::kGlobalMin
                                              : StepMode::kPerAgent;
  }
};

int run_cli(int argc, char** argv) {
  CLI::App app{"online decentralized tracking for time-varying optimal power flow"};
  app.require_subcommand(1);

  // gen-scenario
  auto* gen = app.add_subcommand("gen-scenario", "generate a synthetic scenario");
  std::string gen_case, gen_out = "scenario.json", shape = "noon-peak";
  double noise = 0.02, gen_t0 = 0.0, gen_tend = 60.0, knot_dt = 5.0;
  std::uint64_t gen_seed = 0;
  gen->add_option("--case", gen_case, "case file")->required();
  gen->add_option("--shape", shape, "flat|ramp|noon-peak|cloud-transient");
  gen->add_option("--noise", noise, "relative knot noise amplitude");
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--t0", gen_t0, "start time");
  gen->add_option("--t-end", gen_tend, "end time");
  gen->add_option("--knot-dt", knot_dt, "knot spacing");
  gen->add_option("--out", gen_out, "output scenario file");

  // run
  auto* run = app.add_subcommand("run", "run one mode and write csv + summary");
  CommonArgs run_args;
  run_args.add_run_flags(run, true);
  std::string mode = "centralized";
  run->add_option("--mode", mode, "oracle|centralized|decentralized|independent")
      ->check(CLI::IsMember({"oracle", "centralized", "decentralized",
                             "independent"}));

  // compare
  auto* cmp = app.add_subcommand(
      "compare", "run the oracle plus every applicable mode and write metrics");
  CommonArgs cmp_args;
  cmp_args.add_run_flags(cmp, true);

  // verify-equivalence
  auto* ver = app.add_subcommand(
      "verify-equivalence",
      "check one decentralized round against the dense centralized solve");
  std::string ver_case, ver_scenario;
  std::uint64_t ver_seed = 0;
  double ver_t = 0.5;
  ver->add_option("--case", ver_case, "case file")->required();
  ver->add_option("--scenario", ver_scenario, "scenario file (default: synthetic)");
  ver->add_option("--seed", ver_seed, "random seed");
  ver->add_option("--t", ver_t, "evaluation time");

  // sweep-tau
  auto* sweep = app.add_subcommand("sweep-tau",
                                   "tracking error for several sampling periods");
  CommonArgs sweep_args;
  sweep_args.add_run_flags(sweep, true);
  std::string values = "0.01,0.02,0.05,0.1";
  std::string sweep_mode = "centralized";
  sweep->add_option("--values", values, "comma-separated tau values");
  sweep->add_option("--mode", sweep_mode, "centralized|decentralized")
      ->check(CLI::IsMember({"centralized", "decentralized"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);  // prints help or the parse error
    return code == 0 ? 0 : 2;
  }

  if (*gen) {
    Network net = load_case(gen_case);
    Scenario sc = Scenario::make_synthetic(net, shape, noise, gen_seed, gen_t0,
                                           gen_tend, knot_dt);
    sc.save_file(gen_out);
    std::printf("wrote %s\n", gen_out.c_str());
    return 0;
  }

  if (*run) {
    run_args.finalize();
    run_args.cfg.mode = mode;
    Network net = load_case(run_args.case_path);
    auto sc = std::make_shared<Scenario>(Scenario::load_file(run_args.scenario_path));
    Trajectory traj = run_mode(net, sc, run_args.cfg);
    write_run(run_args.out_dir, mode, traj, nullptr,
              config_echo(run_args.cfg, run_args.case_path, run_args.scenario_path));
    std::printf("wrote %s/%s.csv (%zu samples)\n", run_args.out_dir.c_str(),
                mode.c_str(), traj.samples.size());
    return 0;
  }

  if (*cmp) {
    cmp_args.finalize();
    Network net = load_case(cmp_args.case_path);
    auto sc = std::make_shared<Scenario>(Scenario::load_file(cmp_args.scenario_path));
    RunConfig cfg = cmp_args.cfg;
    cfg.mode = "oracle";
    Trajectory oracle = run_mode(net, sc, cfg);
    write_run(cmp_args.out_dir, "oracle", oracle, nullptr,
              config_echo(cfg, cmp_args.case_path, cmp_args.scenario_path));
    std::vector<std::string> modes = {"centralized"};
    if (!net.ds.empty()) {
      modes.push_back("decentralized");
      modes.push_back("independent");
    }
    for (const std::string& m : modes) {
      cfg.mode = m;
      Trajectory traj = run_mode(net, sc, cfg);
      write_run(cmp_args.out_dir, m, traj, &oracle,
                config_echo(cfg, cmp_args.case_path, cmp_args.scenario_path));
      MetricsSummary ms = compute_metrics(traj, oracle);
      std::printf("%-14s mean_rel_err=%.3e max_rel_err=%.3e msgs=%ld\n", m.c_str(),
                  ms.mean_rel_err, ms.max_rel_err, ms.total_msgs);
    }
    return 0;
  }

  if (*ver) {
    Network net = load_case(ver_case);
    std::shared_ptr<const Scenario> sc;
    if (ver_scenario.empty())
      sc = std::make_shared<Scenario>(Scenario::make_synthetic(
          net, "noon-peak", 0.02, ver_seed, ver_t - 1.0, ver_t + 1.0, 0.5));
    else
      sc = std::make_shared<Scenario>(Scenario::load_file(ver_scenario));
    EquivalenceReport rep = verify_equivalence(net, sc, ver_t, ver_seed);
    std::printf("%s max deviation = %.3e (%d variables)\n",
                rep.pass ? "PASS" : "FAIL", rep.max_rel_dev, rep.num_vars);
    return rep.pass ? 0 : 1;
  }

  if (*sweep) {
    sweep_args.finalize();
    sweep_args.cfg.mode = sweep_mode;
    Network net = load_case(sweep_args.case_path);
    auto sc =
        std::make_shared<Scenario>(Scenario::load_file(sweep_args.scenario_path));
    std::vector<double> taus;
    for (size_t pos = 0; pos < values.size();) {
      size_t next = values.find(',', pos);
      if (next == std::string::npos) next = values.size();
      taus.push_back(std::stod(values.substr(pos, next - pos)));
      pos = next + 1;
    }
    auto points = sweep_tau(net, sc, sweep_args.cfg, taus);
    for (const auto& p : points)
      std::printf("tau=%g mean_rel_err=%.6e max_rel_err=%.6e\n", p.tau,
                  p.mean_rel_err, p.max_rel_err);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const DimensionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
