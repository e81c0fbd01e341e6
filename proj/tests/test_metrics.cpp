#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

#include "gridtrack/metrics.hpp"
#include "helpers.hpp"

using namespace gridtrack;
namespace fs = std::filesystem;

namespace {

Trajectory make_traj(int n, double tau, double objective) {
  Trajectory traj;
  for (int i = 0; i < n; ++i) {
    SampleRecord rec;
    rec.t = tau * i;
    rec.objective = objective;
    rec.kkt_error = 1e-7;
    rec.alpha_p = rec.alpha_d = 1.0;
    rec.wall_ms = 0.0;
    rec.msgs = 2;
    traj.samples.push_back(rec);
  }
  return traj;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("identical trajectories have zero error and immediate tracking") {
  Trajectory a = make_traj(70, 0.1, 1.0);
  MetricsSummary m = compute_metrics(a, a);
  CHECK(m.mean_rel_err == 0.0);
  CHECK(m.max_rel_err == 0.0);
  CHECK(m.time_to_track == doctest::Approx(0.0));
  CHECK(m.num_samples == 70);
  CHECK(m.total_msgs == 140);
  CHECK(m.mean_kkt == doctest::Approx(1e-7));
}

TEST_CASE("time-to-track finds the first sustained sub-percent sample") {
  Trajectory oracle = make_traj(70, 0.1, 1.0);
  Trajectory track = make_traj(70, 0.1, 1.0);
  for (int i = 0; i < 10; ++i) track.samples[i].objective = 1.02;
  MetricsSummary m = compute_metrics(track, oracle);
  CHECK(m.time_to_track == doctest::Approx(1.0));
  CHECK(m.max_rel_err == doctest::Approx(0.02));
  CHECK(m.mean_rel_err == doctest::Approx(0.02 * 10.0 / 70.0));

  // never settling leaves time-to-track undefined
  for (auto& s : track.samples) s.objective = 1.05;
  m = compute_metrics(track, oracle);
  CHECK(std::isnan(m.time_to_track));

  // without an oracle the error fields are undefined too
  m = compute_metrics(track);
  CHECK(std::isnan(m.mean_rel_err));
  CHECK(std::isnan(m.max_rel_err));
}

TEST_CASE("mismatched sampling grids are rejected") {
  Trajectory a = make_traj(10, 0.1, 1.0);
  Trajectory b = make_traj(11, 0.1, 1.0);
  CHECK_THROWS_AS(relative_errors(a, b), DimensionError);
  Trajectory c = make_traj(10, 0.2, 1.0);
  CHECK_THROWS_AS(relative_errors(a, c), DimensionError);
}

TEST_CASE("CSV output has the fixed header and is deterministic") {
  Trajectory track = make_traj(3, 0.5, 2.0);
  Trajectory oracle = make_traj(3, 0.5, 1.0);
  fs::path dir = fs::temp_directory_path();
  std::string p1 = (dir / "traj1.csv").string();
  std::string p2 = (dir / "traj2.csv").string();
  write_csv(p1, track, &oracle);
  write_csv(p2, track, &oracle);
  std::string body = slurp(p1);
  CHECK(body == slurp(p2));
  CHECK(body.rfind("t,objective,kkt_error,rel_err_vs_oracle,alpha_p,alpha_d,"
                   "wall_ms,msgs\n",
                   0) == 0);
  // 1 header + 3 sample lines
  CHECK(std::count(body.begin(), body.end(), '\n') == 4);
  CHECK(body.find("0.5,2,1e-07,1,1,1,0,2") != std::string::npos);

  std::string p3 = (dir / "traj3.csv").string();
  write_csv(p3, track, nullptr);
  std::string no_oracle = slurp(p3);
  CHECK(no_oracle.find(",nan,") != std::string::npos);
  CHECK_FALSE(fs::exists(p3 + ".tmp"));
}

TEST_CASE("summary JSON is parseable and maps NaN to null") {
  Trajectory track = make_traj(5, 0.1, 1.0);
  MetricsSummary m = compute_metrics(track);  // no oracle: NaN errors
  std::string path = (fs::temp_directory_path() / "summary.json").string();
  write_summary_json(path, m, {{"mode", "centralized"}, {"tau", "0.1"}});
  nlohmann::json j = nlohmann::json::parse(slurp(path));
  CHECK(j["summary"]["mean_rel_err"].is_null());
  CHECK(j["summary"]["time_to_track"].is_null());
  CHECK(j["summary"]["num_samples"] == 5);
  CHECK(j["summary"]["total_msgs"] == 10);
  CHECK(j["config"]["mode"] == "centralized");
}
