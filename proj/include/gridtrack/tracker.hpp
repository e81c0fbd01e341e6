#pragma once

#include <vector>

#include "gridtrack/pdipm.hpp"

namespace gridtrack {

// Online prediction-correction tracker: one damped Newton iteration of the
// perturbed KKT system per sampling period tau, with an optional prediction
// term that feeds the parameter drift through the same factorization.
struct TrackerConfig {
  double tau = 0.1;
  double alpha = 0.0;  // correction gain; 0 selects the default 1/tau
  bool prediction = true;
  double gamma = 0.9995;
  // Centering for the per-sample barrier update. Tracking follows the central
  // path at its current barrier level; sigma < 1 would re-target mu below the
  // present complementarity each sample, and the 1/tau correction gain then
  // amplifies that mismatch into a fraction-to-boundary step length of order
  // tau whenever any constraint is active.
  double sigma = 1.0;
  double mu_floor = 1e-10;
  PdipmOptions burn_in;  // converged solve at the start of the horizon

  double effective_alpha() const { return alpha > 0.0 ? alpha : 1.0 / tau; }
};

struct SampleRecord {
  double t = 0.0;
  double objective = 0.0;
  double kkt_error = 0.0;
  double alpha_p = 1.0, alpha_d = 1.0;  // step lengths taken when leaving t
  double wall_ms = 0.0;
  long msgs = 0;
  VecX x;
};

struct Trajectory {
  std::vector<SampleRecord> samples;
};

// Converged solve at time t used to initialize tracking.
PrimalDualState tracker_burn_in(const NlpProblem& p, double t,
                                const TrackerConfig& cfg);

// Advances the state from sample time t to t + tau: one increment with gain
// alpha (prediction included per config), fraction-to-boundary step lengths
// scaled by min(tau, 1), then one barrier update floored at mu_floor.
StepLengths track_step(const NlpProblem& p, PrimalDualState& s, double t,
                       const TrackerConfig& cfg, BorderedSolver& solver);

// Burn-in at t_start, then one track_step per sample until t_end.
Trajectory run_tracker(const NlpProblem& p, double t_start, double t_end,
                       const TrackerConfig& cfg);

// Reference trajectory: a full interior-point solve at every sample time.
Trajectory run_oracle(const NlpProblem& p, double t_start, double t_end, double tau,
                      const PdipmOptions& opt = {});

}  // namespace gridtrack
