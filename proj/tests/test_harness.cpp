#include <cmath>
#include <memory>

#include <doctest.h>

#include "gridtrack/harness.hpp"
#include "helpers.hpp"

using namespace gridtrack;

namespace {

std::shared_ptr<Scenario> synthetic(const Network& net, double t1 = 1.0) {
  return std::make_shared<Scenario>(
      Scenario::make_synthetic(net, "noon-peak", 0.02, 2, 0.0, t1, t1 / 4.0));
}

}  // namespace

TEST_CASE("run configuration is validated before any solve") {
  Network toy = load_case(testutil::case_path("toy2.json"));
  auto sc = synthetic(toy);
  RunConfig cfg;
  cfg.tau = 0.0;
  CHECK_THROWS_AS(run_mode(toy, sc, cfg), ValidationError);
  cfg.tau = 0.05;
  cfg.t_end = cfg.t0;
  CHECK_THROWS_AS(run_mode(toy, sc, cfg), ValidationError);
  cfg.t_end = 1.0;
  cfg.mode = "warp";
  CHECK_THROWS_AS(run_mode(toy, sc, cfg), ValidationError);
  // coupling modes need at least one distribution system
  cfg.mode = "decentralized";
  CHECK_THROWS_AS(run_mode(toy, sc, cfg), ValidationError);
  cfg.mode = "independent";
  CHECK_THROWS_AS(run_mode(toy, sc, cfg), ValidationError);
}

TEST_CASE("problem construction dispatches on the network shape") {
  Network toy = load_case(testutil::case_path("toy2.json"));
  auto p_toy = make_problem(toy, synthetic(toy));
  CHECK(dynamic_cast<OpfProblem*>(p_toy.get()) != nullptr);

  Network net = load_case(testutil::case_path("t2d3.json"));
  auto p_net = make_problem(net, synthetic(net));
  CHECK(dynamic_cast<CompositeNlp*>(p_net.get()) != nullptr);
}

TEST_CASE("oracle and centralized modes track the transmission-only case") {
  Network toy = load_case(testutil::case_path("toy2.json"));
  // slow scenario relative to the run window so the tracker can keep up
  auto sc = synthetic(toy, 10.0);
  RunConfig cfg;
  cfg.tau = 0.05;
  cfg.t0 = 0.0;
  cfg.t_end = 0.2;

  cfg.mode = "oracle";
  Trajectory oracle = run_mode(toy, sc, cfg);
  REQUIRE(oracle.samples.size() == 5);
  for (const auto& s : oracle.samples) CHECK(s.kkt_error <= 1e-6);

  cfg.mode = "centralized";
  Trajectory track = run_mode(toy, sc, cfg);
  REQUIRE(track.samples.size() == 5);
  MetricsSummary m = compute_metrics(track, oracle);
  CHECK(m.mean_rel_err <= 1e-3);
  CHECK(std::isfinite(m.max_kkt));
}

TEST_CASE("independent mode produces converged finite samples") {
  Network net = load_case(testutil::case_path("t2d3.json"));
  auto sc = synthetic(net, 0.2);
  RunConfig cfg;
  cfg.mode = "independent";
  cfg.tau = 0.1;
  cfg.t_end = 0.2;
  Trajectory traj = run_mode(net, sc, cfg);
  REQUIRE(traj.samples.size() == 3);
  for (const auto& s : traj.samples) {
    CHECK(std::isfinite(s.objective));
    CHECK(s.kkt_error <= 1e-5);
    CHECK(s.alpha_p == 0.0);
  }
}

TEST_CASE("the sampling-period sweep rejects non-tracking modes") {
  Network net = load_case(testutil::case_path("t2d3.json"));
  auto sc = synthetic(net, 0.2);
  RunConfig cfg;
  cfg.mode = "oracle";
  cfg.t_end = 0.2;
  CHECK_THROWS_AS(sweep_tau(net, sc, cfg, {0.1}), ValidationError);
  cfg.mode = "independent";
  CHECK_THROWS_AS(sweep_tau(net, sc, cfg, {0.1}), ValidationError);

  cfg.mode = "centralized";
  auto points = sweep_tau(net, sc, cfg, {0.1});
  REQUIRE(points.size() == 1);
  CHECK(points[0].tau == doctest::Approx(0.1));
  CHECK(std::isfinite(points[0].mean_rel_err));
  CHECK(points[0].max_rel_err >= points[0].mean_rel_err);
}
