#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gridtrack/baselines.hpp"
#include "gridtrack/coordination.hpp"
#include "gridtrack/metrics.hpp"

namespace gridtrack {

struct RunConfig {
  std::string mode = "centralized";  // oracle|centralized|decentralized|independent
  double tau = 0.02;
  double alpha = 0.0;  // 0 selects 1/tau
  double t0 = 0.0, t_end = 1.0;
  std::uint64_t seed = 0;
  bool prediction = true;
  StepMode step_mode = StepMode::kPerAgent;
};

TrackerConfig tracker_config(const RunConfig& cfg);

// The full problem: the coupled composite when the network has DSs, the
// plain transmission OPF otherwise.
std::shared_ptr<NlpProblem> make_problem(const Network& net,
                                         std::shared_ptr<const Scenario> sc);

// Dispatches on cfg.mode. The independent mode re-solves both sides per
// sample under the nominal boundary assumption frozen at cfg.t0.
Trajectory run_mode(const Network& net, std::shared_ptr<const Scenario> sc,
                    const RunConfig& cfg);

struct SweepPoint {
  double tau = 0.0;
  double mean_rel_err = 0.0;
  double max_rel_err = 0.0;
};
// Tracking-vs-oracle error for each sampling period, using cfg.mode as the
// tracking mode (oracle/independent are rejected).
std::vector<SweepPoint> sweep_tau(const Network& net,
                                  std::shared_ptr<const Scenario> sc,
                                  const RunConfig& cfg,
                                  const std::vector<double>& taus);

}  // namespace gridtrack
