#include "gridtrack/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace gridtrack {

TrackerConfig tracker_config(const RunConfig& cfg) {
  TrackerConfig tc;
  tc.tau = cfg.tau;
  tc.alpha = cfg.alpha;
  tc.prediction = cfg.prediction;
  return tc;
}

std::shared_ptr<NlpProblem> make_problem(const Network& net,
                                         std::shared_ptr<const Scenario> sc) {
  if (net.ds.empty())
    return std::make_shared<OpfProblem>(make_ts_model(net), std::move(sc));
  return partition_network(net, std::move(sc));
}

namespace {

Trajectory run_independent(const Network& net, std::shared_ptr<const Scenario> sc,
                           const RunConfig& cfg) {
  if (net.ds.empty())
    throw ValidationError("independent mode needs distribution systems");
  BoundaryAssumption assumption = BoundaryAssumption::nominal(net, *sc, cfg.t0);
  OpfProblem ts(make_ts_model_fixed_ties(
                    net,
                    [&] {
                      std::vector<std::pair<double, double>> pq;
                      for (const auto& tie : net.ties)
                        for (const auto& fix : assumption.per_ds)
                          if (fix.ds_id == tie.ds_id)
                            pq.emplace_back(fix.tie_p, fix.tie_q);
                      return pq;
                    }()),
                sc);
  std::vector<std::unique_ptr<OpfProblem>> ds;
  for (const auto& fix : assumption.per_ds) {
    double e = fix.root_v * std::cos(fix.root_angle);
    double f = fix.root_v * std::sin(fix.root_angle);
    ds.push_back(std::make_unique<OpfProblem>(
        make_ds_model_pinned_root(net, fix.ds_id, e, f), sc));
  }

  using clock = std::chrono::steady_clock;
  Trajectory traj;
  const double tol = 1e-9 * std::max(1.0, std::abs(cfg.t_end));
  for (double t = cfg.t0; t <= cfg.t_end + tol; t += cfg.tau) {
    auto start = clock::now();
    SampleRecord rec;
    rec.t = t;
    rec.alpha_p = rec.alpha_d = 0.0;
    SolveResult rts = solve_converged(ts, t);
    if (!rts.converged)
      throw SolverError("independent ts solve failed at t=" + std::to_string(t));
    rec.objective = ts.objective(rts.state.x, t);
    rec.kkt_error = kkt_error(ts, rts.state, t);
    for (const auto& dsp : ds) {
      SolveResult r = solve_converged(*dsp, t);
      if (!r.converged)
        throw SolverError("independent ds solve failed at t=" + std::to_string(t));
      rec.objective += dsp->objective(r.state.x, t);
      rec.kkt_error = std::max(rec.kkt_error, kkt_error(*dsp, r.state, t));
    }
    rec.wall_ms =
        std::chrono::duration<double, std::milli>(clock::now() - start).count();
    traj.samples.push_back(std::move(rec));
  }
  return traj;
}

}  // namespace

Trajectory run_mode(const Network& net, std::shared_ptr<const Scenario> sc,
                    const RunConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ValidationError("tau must be > 0");
  if (!(cfg.t_end > cfg.t0)) throw ValidationError("t-end must exceed t0");
  if (cfg.mode == "oracle")
    return run_oracle(*make_problem(net, sc), cfg.t0, cfg.t_end, cfg.tau);
  if (cfg.mode == "centralized")
    return run_tracker(*make_problem(net, sc), cfg.t0, cfg.t_end,
                       tracker_config(cfg));
  if (cfg.mode == "decentralized") {
    if (net.ds.empty())
      throw ValidationError("decentralized mode needs distribution systems");
    return run_decentralized(net, sc, cfg.t0, cfg.t_end, tracker_config(cfg),
                             cfg.step_mode);
  }
  if (cfg.mode == "independent") return run_independent(net, sc, cfg);
  throw ValidationError("unknown mode: " + cfg.mode);
}

std::vector<SweepPoint> sweep_tau(const Network& net,
                                  std::shared_ptr<const Scenario> sc,
                                  const RunConfig& cfg,
                                  const std::vector<double>& taus) {
  if (cfg.mode != "centralized" && cfg.mode != "decentralized")
    throw ValidationError("sweep-tau needs a tracking mode");
  std::vector<SweepPoint> points;
  for (double tau : taus) {
    RunConfig c = cfg;
    c.tau = tau;
    Trajectory track = run_mode(net, sc, c);
    c.mode = "oracle";
    Trajectory oracle = run_mode(net, sc, c);
    MetricsSummary m = compute_metrics(track, oracle);
    points.push_back({tau, m.mean_rel_err, m.max_rel_err});
  }
  return points;
}

}  // namespace gridtrack
