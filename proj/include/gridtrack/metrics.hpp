#pragma once

#include <map>
#include <string>

#include "gridtrack/tracker.hpp"

namespace gridtrack {

struct MetricsSummary {
  double mean_rel_err = 0.0, max_rel_err = 0.0;
  double mean_kkt = 0.0, max_kkt = 0.0;
  // First sample time from which the relative objective error stays below 1%
  // for 50 consecutive samples (or through the end); NaN if never reached.
  double time_to_track = 0.0;
  long total_msgs = 0;
  double total_wall_ms = 0.0;
  int num_samples = 0;
};

// Per-sample |objective_track - objective_oracle| / |objective_oracle|.
std::vector<double> relative_errors(const Trajectory& track,
                                    const Trajectory& oracle);

MetricsSummary compute_metrics(const Trajectory& track, const Trajectory& oracle);
MetricsSummary compute_metrics(const Trajectory& track);  // no oracle available

// CSV body: header t,objective,kkt_error,rel_err_vs_oracle,alpha_p,alpha_d,
// wall_ms,msgs. rel_err_vs_oracle is "nan" without an oracle. Every field
// except wall_ms is deterministic for fixed flags and seed.
void write_csv(const std::string& path, const Trajectory& track,
               const Trajectory* oracle);

// JSON summary: the metrics block plus an echo of the run configuration.
void write_summary_json(const std::string& path, const MetricsSummary& summary,
                        const std::map<std::string, std::string>& config_echo);

}  // namespace gridtrack
