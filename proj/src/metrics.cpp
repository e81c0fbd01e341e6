#include "gridtrack/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace gridtrack {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void check_grids(const Trajectory& track, const Trajectory& oracle) {
  if (track.samples.size() != oracle.samples.size())
    throw DimensionError("trajectories have different sample counts");
  for (size_t i = 0; i < track.samples.size(); ++i)
    if (std::abs(track.samples[i].t - oracle.samples[i].t) > 1e-9)
      throw DimensionError("trajectories sampled on different grids");
}

void write_atomic(const std::string& path, const std::string& body) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << body;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw Error("cannot move " + tmp + " to " + path);
}

MetricsSummary summarize(const Trajectory& track, const std::vector<double>* errs) {
  MetricsSummary m;
  m.num_samples = static_cast<int>(track.samples.size());
  for (const auto& s : track.samples) {
    m.mean_kkt += s.kkt_error;
    m.max_kkt = std::max(m.max_kkt, s.kkt_error);
    m.total_msgs += s.msgs;
    m.total_wall_ms += s.wall_ms;
  }
  if (m.num_samples > 0) m.mean_kkt /= m.num_samples;
  m.time_to_track = std::numeric_limits<double>::quiet_NaN();
  if (!errs) {
    m.mean_rel_err = m.max_rel_err = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  for (double e : *errs) {
    m.mean_rel_err += e;
    m.max_rel_err = std::max(m.max_rel_err, e);
  }
  if (!errs->empty()) m.mean_rel_err /= static_cast<double>(errs->size());
  const int n = static_cast<int>(errs->size());
  for (int i = 0; i < n; ++i) {
    bool sustained = true;
    for (int j = i; j < std::min(i + 50, n); ++j)
      if ((*errs)[j] >= 0.01) {
        sustained = false;
        break;
      }
    if (sustained) {
      m.time_to_track = track.samples[i].t;
      break;
    }
  }
  return m;
}

}  // namespace

std::vector<double> relative_errors(const Trajectory& track,
                                    const Trajectory& oracle) {
  check_grids(track, oracle);
  std::vector<double> errs;
  errs.reserve(track.samples.size());
  for (size_t i = 0; i < track.samples.size(); ++i) {
    double ref = oracle.samples[i].objective;
    errs.push_back(std::abs(track.samples[i].objective - ref) / std::abs(ref));
  }
  return errs;
}

MetricsSummary compute_metrics(const Trajectory& track, const Trajectory& oracle) {
  std::vector<double> errs = relative_errors(track, oracle);
  return summarize(track, &errs);
}

MetricsSummary compute_metrics(const Trajectory& track) {
  return summarize(track, nullptr);
}

void write_csv(const std::string& path, const Trajectory& track,
               const Trajectory* oracle) {
  std::vector<double> errs;
  if (oracle) errs = relative_errors(track, *oracle);
  std::string body = "t,objective,kkt_error,rel_err_vs_oracle,alpha_p,alpha_d,wall_ms,msgs\n";
  for (size_t i = 0; i < track.samples.size(); ++i) {
    const SampleRecord& s = track.samples[i];
    body += fmt(s.t) + "," + fmt(s.objective) + "," + fmt(s.kkt_error) + "," +
            (oracle ? fmt(errs[i]) : std::string("nan")) + "," + fmt(s.alpha_p) +
            "," + fmt(s.alpha_d) + "," + fmt(s.wall_ms) + "," +
            std::to_string(s.msgs) + "\n";
  }
  write_atomic(path, body);
}

void write_summary_json(const std::string& path, const MetricsSummary& summary,
                        const std::map<std::string, std::string>& config_echo) {
  nlohmann::json j;
  auto num = [](double v) -> nlohmann::json {
    if (std::isnan(v)) return nullptr;
    return v;
  };
  j["summary"] = {{"mean_rel_err", num(summary.mean_rel_err)},
                  {"max_rel_err", num(summary.max_rel_err)},
                  {"mean_kkt", summary.mean_kkt},
                  {"max_kkt", summary.max_kkt},
                  {"time_to_track", num(summary.time_to_track)},
                  {"total_msgs", summary.total_msgs},
                  {"total_wall_ms", summary.total_wall_ms},
                  {"num_samples", summary.num_samples}};
  j["config"] = config_echo;
  write_atomic(path, j.dump(1) + "\n");
}

}  // namespace gridtrack
