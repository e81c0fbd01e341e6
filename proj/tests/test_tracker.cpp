#include <cmath>
#include <memory>

#include <doctest.h>

#include "gridtrack/tracker.hpp"
#include "helpers.hpp"

using namespace gridtrack;

namespace {

// min (x - t)^2, unconstrained scalar target moving at unit speed
std::shared_ptr<CallbackNlp> moving_target() {
  auto p = std::make_shared<CallbackNlp>();
  p->n = 1;
  p->f = [](const VecX& x, double t) { return (x(0) - t) * (x(0) - t); };
  p->grad_f = [](const VecX& x, double t) {
    return VecX::Constant(1, 2.0 * (x(0) - t));
  };
  p->hess_f = [](const VecX&, double) {
    SpMat h(1, 1);
    h.insert(0, 0) = 2.0;
    return h;
  };
  p->dgrad_f_dt = [](const VecX&, double) { return VecX::Constant(1, -2.0); };
  return p;
}

}  // namespace

TEST_CASE("prediction tracks a unit-speed target with zero lag") {
  auto p = moving_target();
  TrackerConfig cfg;
  cfg.tau = 0.25;
  cfg.prediction = true;
  PrimalDualState s = tracker_burn_in(*p, 0.0, cfg);
  BorderedSolver solver;
  double t = 0.0;
  for (int k = 0; k < 20; ++k) {
    track_step(*p, s, t, cfg, solver);
    t += cfg.tau;
    CHECK(std::abs(s.x(0) - t) <= 1e-10);
  }
}

TEST_CASE("without prediction the same target is tracked with a one-period lag") {
  auto p = moving_target();
  TrackerConfig cfg;
  cfg.tau = 0.25;
  cfg.prediction = false;
  PrimalDualState s = tracker_burn_in(*p, 0.0, cfg);
  BorderedSolver solver;
  double t = 0.0;
  for (int k = 0; k < 20; ++k) {
    track_step(*p, s, t, cfg, solver);
    t += cfg.tau;
    // the correction reproduces the previous target, one sample behind
    CHECK(std::abs(s.x(0) - (t - cfg.tau)) <= 1e-10);
  }
}

TEST_CASE("tracking runs produce one record per sample on the tau grid") {
  auto p = moving_target();
  TrackerConfig cfg;
  cfg.tau = 0.25;
  Trajectory traj = run_tracker(*p, 0.0, 1.0, cfg);
  REQUIRE(traj.samples.size() == 5);
  for (size_t k = 0; k < traj.samples.size(); ++k) {
    CHECK(traj.samples[k].t == doctest::Approx(0.25 * k));
  }
  // the first record is the burn-in: already converged
  CHECK(traj.samples.front().kkt_error <= 1e-6);
  // no step leaves the last sample
  CHECK(traj.samples.back().alpha_p == 0.0);
  CHECK(traj.samples.back().alpha_d == 0.0);
  CHECK(traj.samples[0].alpha_p > 0.0);

  TrackerConfig bad = cfg;
  bad.tau = 0.0;
  CHECK_THROWS_AS(run_tracker(*p, 0.0, 1.0, bad), ValidationError);
}

TEST_CASE("a converged state is a fixed point when the scenario is constant") {
  // constrained scalar problem: min (x - 0.5)^2 with x in [0, 2]
  auto p = std::make_shared<CallbackNlp>();
  p->n = 1;
  p->m_ineq = 1;
  p->lb = VecX::Constant(1, 0.0);
  p->ub = VecX::Constant(1, 2.0);
  p->f = [](const VecX& x, double) { return (x(0) - 0.5) * (x(0) - 0.5); };
  p->grad_f = [](const VecX& x, double) { return VecX::Constant(1, 2.0 * (x(0) - 0.5)); };
  p->hess_f = [](const VecX&, double) {
    SpMat h(1, 1);
    h.insert(0, 0) = 2.0;
    return h;
  };
  p->h = [](const VecX& x, double) { return x; };
  p->jac_h = [](const VecX&, double) {
    SpMat j(1, 1);
    j.insert(0, 0) = 1.0;
    return j;
  };

  TrackerConfig cfg;
  cfg.tau = 1.0;
  cfg.burn_in.eps_kkt = 1e-11;
  cfg.burn_in.eps_gap = 1e-11;
  PrimalDualState s = tracker_burn_in(*p, 0.0, cfg);
  BorderedSolver solver;
  for (int k = 0; k < 100; ++k) {
    VecX before = s.x;
    track_step(*p, s, 0.0, cfg, solver);
    CHECK((s.x - before).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(s.strictly_interior());
  }
}

TEST_CASE("the reference trajectory is converged at every sample") {
  auto p = moving_target();
  Trajectory traj = run_oracle(*p, 0.0, 1.0, 0.25);
  REQUIRE(traj.samples.size() == 5);
  for (const SampleRecord& rec : traj.samples) {
    CHECK(rec.kkt_error <= 1e-6);
    CHECK(rec.alpha_p == 0.0);
    CHECK(rec.x(0) == doctest::Approx(rec.t).epsilon(1e-6));
  }
}

TEST_CASE("prediction reduces tracking error on a smooth nonlinear target") {
  // min (x - sin t)^2: the drift term is genuinely state-independent here,
  // so prediction should beat pure correction at any fixed tau
  auto make = [] {
    auto p = std::make_shared<CallbackNlp>();
    p->n = 1;
    p->f = [](const VecX& x, double t) {
      double d = x(0) - std::sin(t);
      return d * d;
    };
    p->grad_f = [](const VecX& x, double t) {
      return VecX::Constant(1, 2.0 * (x(0) - std::sin(t)));
    };
    p->hess_f = [](const VecX&, double) {
      SpMat h(1, 1);
      h.insert(0, 0) = 2.0;
      return h;
    };
    p->dgrad_f_dt = [](const VecX&, double t) {
      return VecX::Constant(1, -2.0 * std::cos(t));
    };
    return p;
  };
  auto err = [&](bool prediction) {
    auto p = make();
    TrackerConfig cfg;
    cfg.tau = 0.1;
    cfg.prediction = prediction;
    Trajectory traj = run_tracker(*p, 0.0, 3.0, cfg);
    double total = 0.0;
    for (const SampleRecord& rec : traj.samples)
      total += std::abs(rec.x(0) - std::sin(rec.t));
    return total / static_cast<double>(traj.samples.size());
  };
  double on = err(true), off = err(false);
  CHECK(on < off);
  CHECK(on <= 0.01);
}

TEST_CASE("each online step performs exactly one Hessian evaluation") {
  auto p = moving_target();
  int hess_evals = 0;
  auto base = p->hess_f;
  p->hess_f = [&hess_evals, base](const VecX& x, double t) {
    ++hess_evals;
    return base(x, t);
  };
  TrackerConfig cfg;
  cfg.tau = 0.5;
  PrimalDualState s = tracker_burn_in(*p, 0.0, cfg);
  BorderedSolver solver;
  hess_evals = 0;
  for (int k = 0; k < 10; ++k) track_step(*p, s, 0.5 * k, cfg, solver);
  CHECK(hess_evals == 10);
}
