#include "gridtrack/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace gridtrack {

namespace {

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch())
      .count();
}

SampleRecord make_record(const NlpProblem& p, const PrimalDualState& s, double t) {
  SampleRecord rec;
  rec.t = t;
  rec.objective = p.objective(s.x, t);
  rec.kkt_error = kkt_error(p, s, t);
  rec.x = s.x;
  return rec;
}

}  // namespace

PrimalDualState tracker_burn_in(const NlpProblem& p, double t,
                                const TrackerConfig& cfg) {
  SolveResult res = solve_converged(p, t, cfg.burn_in);
  if (!res.converged)
    throw SolverError("tracker burn-in did not converge at t=" + std::to_string(t));
  res.state.mu = std::max(barrier_update(res.state, cfg.sigma), cfg.mu_floor);
  return res.state;
}

StepLengths track_step(const NlpProblem& p, PrimalDualState& s, double t,
                       const TrackerConfig& cfg, BorderedSolver& solver) {
  Increment inc =
      compute_increment(p, s, t, cfg.effective_alpha(), cfg.prediction, solver);
  StepLengths sl = step_lengths(s, inc, cfg.gamma);
  double scale = std::min(cfg.tau, 1.0);
  StepLengths applied{scale * sl.alpha_p, scale * sl.alpha_d};
  apply_step(s, inc, applied);
  s.mu = std::max(barrier_update(s, cfg.sigma), cfg.mu_floor);
  return sl;
}

Trajectory run_tracker(const NlpProblem& p, double t_start, double t_end,
                       const TrackerConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ValidationError("tracker: tau must be > 0");
  Trajectory traj;
  double t0 = now_ms();
  PrimalDualState s = tracker_burn_in(p, t_start, cfg);
  SampleRecord rec = make_record(p, s, t_start);
  rec.wall_ms = now_ms() - t0;
  BorderedSolver solver;
  const double tol = 1e-9 * std::max(1.0, std::abs(t_end));
  for (double t = t_start; t <= t_end + tol; t += cfg.tau) {
    if (t + cfg.tau > t_end + tol) {
      rec.alpha_p = rec.alpha_d = 0.0;  // no step leaves the last sample
      traj.samples.push_back(std::move(rec));
      break;
    }
    double ts = now_ms();
    StepLengths sl = track_step(p, s, t, cfg, solver);
    rec.alpha_p = sl.alpha_p;
    rec.alpha_d = sl.alpha_d;
    traj.samples.push_back(std::move(rec));
    rec = make_record(p, s, t + cfg.tau);
    rec.wall_ms = now_ms() - ts;
  }
  return traj;
}

Trajectory run_oracle(const NlpProblem& p, double t_start, double t_end, double tau,
                      const PdipmOptions& opt) {
  if (!(tau > 0.0)) throw ValidationError("oracle: tau must be > 0");
  Trajectory traj;
  const double tol = 1e-9 * std::max(1.0, std::abs(t_end));
  for (double t = t_start; t <= t_end + tol; t += tau) {
    double ts = now_ms();
    SolveResult res = solve_converged(p, t, opt);
    if (!res.converged)
      throw SolverError("reference solve did not converge at t=" + std::to_string(t));
    SampleRecord rec = make_record(p, res.state, t);
    rec.wall_ms = now_ms() - ts;
    rec.alpha_p = rec.alpha_d = 0.0;
    traj.samples.push_back(std::move(rec));
  }
  return traj;
}

}  // namespace gridtrack
