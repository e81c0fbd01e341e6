#include <cmath>
#include <memory>

#include <doctest.h>

#include "gridtrack/coordination.hpp"
#include "gridtrack/opf_problem.hpp"
#include "gridtrack/pdipm.hpp"
#include "helpers.hpp"

using namespace gridtrack;

TEST_CASE("condensed increments equal the dense six-block reference") {
  int count = 0;
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    int n = 2 + static_cast<int>(seed % 5);
    int m = static_cast<int>(seed % 3);  // 0..2 equalities
    int r = static_cast<int>(seed % 4);  // 0..3 inequalities
    if (m >= n) m = n - 1;
    auto p = testutil::random_nlp(n, m, r, seed);
    for (double alpha : {1.0, 1.7}) {
      for (bool prediction : {false, true}) {
        PrimalDualState s = random_interior_state(*p, 0.4, 100 + seed);
        BorderedSolver solver;
        Increment sparse = compute_increment(*p, s, 0.4, alpha, prediction, solver);
        Increment dense = dense_full_increment(*p, s, 0.4, alpha, prediction);
        CAPTURE(seed);
        CHECK(testutil::increment_deviation(sparse, dense) <= 1e-8);
        ++count;
      }
    }
  }
  CHECK(count == 48);
}

TEST_CASE("the dense reference system linearizes the residual bundle") {
  auto p = testutil::random_nlp(4, 2, 3, 31);
  PrimalDualState s = random_interior_state(*p, 0.2, 32);
  Increment inc = dense_full_increment(*p, s, 0.2, 1.0, false);
  auto bundle_vec = [&](const PrimalDualState& st) {
    ResidualBundle r = kkt_residual(*p, st, 0.2);
    VecX v(r.lx.size() + r.ly.size() + r.lw.size() + r.lz.size() + r.lu.size() +
           r.ll.size());
    v << r.lx, r.ly, r.lw, r.lz, r.lu, r.ll;
    return v;
  };
  const double eps = 1e-6;
  PrimalDualState moved = s;
  StepLengths full{eps, eps};
  apply_step(moved, inc, full);
  VecX r0 = bundle_vec(s), r1 = bundle_vec(moved);
  // a Newton increment satisfies J * inc = -r, so r(s + eps*inc) ~ (1-eps) r(s)
  CHECK((r1 - (1.0 - eps) * r0).cwiseAbs().maxCoeff() <=
        1e-9 * (1.0 + r0.cwiseAbs().maxCoeff()));
}

TEST_CASE("fraction-to-boundary step lengths hit the documented ratios") {
  PrimalDualState s;
  s.x = VecX::Zero(1);
  s.y = VecX::Zero(0);
  s.u = VecX::Constant(1, 1.0);
  s.l = VecX::Constant(1, 2.0);
  s.z = VecX::Constant(1, 1.0);
  s.w = VecX::Constant(1, -1.0);
  Increment inc;
  inc.dx = VecX::Zero(1);
  inc.dy = VecX::Zero(0);
  inc.du = VecX::Constant(1, -2.0);  // blocks primal at 0.5
  inc.dl = VecX::Constant(1, 1.0);
  inc.dz = VecX::Constant(1, 0.5);
  inc.dw = VecX::Constant(1, 4.0);  // w -> 0 at 0.25, blocks dual
  StepLengths sl = step_lengths(s, inc, 0.9995);
  CHECK(sl.alpha_p == doctest::Approx(0.9995 * 0.5));
  CHECK(sl.alpha_d == doctest::Approx(0.9995 * 0.25));

  inc.du = VecX::Constant(1, 0.3);
  inc.dw = VecX::Constant(1, -1.0);
  sl = step_lengths(s, inc, 0.9995);
  CHECK(sl.alpha_p == doctest::Approx(1.0));
  CHECK(sl.alpha_d == doctest::Approx(1.0));

  PrimalDualState stepped = s;
  apply_step(stepped, inc, StepLengths{0.5, 0.25});
  CHECK(stepped.u(0) == doctest::Approx(1.0 + 0.5 * 0.3));
  CHECK(stepped.w(0) == doctest::Approx(-1.0 + 0.25 * -1.0));
  CHECK(stepped.z(0) == doctest::Approx(1.0 + 0.25 * 0.5));
}

TEST_CASE("barrier update follows sigma * gap / (2r)") {
  PrimalDualState s;
  s.u = VecX::Constant(2, 1.0);
  s.w = VecX::Constant(2, -0.5);
  s.l = VecX::Constant(2, 2.0);
  s.z = VecX::Constant(2, 0.25);
  // gap = l'z - u'w = 1.0 + 1.0 = 2.0
  CHECK(barrier_update(s, 0.1) == doctest::Approx(0.1 * 2.0 / 4.0));
  PrimalDualState empty;
  empty.u = empty.w = empty.l = empty.z = VecX::Zero(0);
  CHECK(barrier_update(empty, 0.1) == 0.0);
}

TEST_CASE("interior initialization floors slacks and stays interior") {
  auto p = testutil::random_nlp(4, 1, 3, 17);
  PdipmOptions opt;
  PrimalDualState s = interior_init(*p, 0.0, opt);
  CHECK(s.strictly_interior());
  CHECK(s.y.cwiseAbs().maxCoeff() == 0.0);
  VecX h = p->ineq_constraints(s.x, 0.0);
  for (int i = 0; i < p->num_ineq(); ++i) {
    CHECK(s.u(i) == doctest::Approx(std::max(p->ineq_upper()(i) - h(i), 0.1)));
    CHECK(s.l(i) == doctest::Approx(std::max(h(i) - p->ineq_lower()(i), 0.1)));
    CHECK(s.z(i) == doctest::Approx(opt.mu0 / s.l(i)));
    CHECK(s.w(i) == doctest::Approx(-opt.mu0 / s.u(i)));
  }
}

TEST_CASE("bordered solver validates usage and survives a singular first try") {
  BorderedSolver fresh;
  CHECK_THROWS_AS(fresh.solve(VecX::Zero(1), VecX::Zero(0)), SolverError);

  // singular Hessian block: the +/- regularization retry must kick in
  SpMat hess(2, 2);
  hess.insert(0, 0) = 1.0;  // second diagonal entry structurally zero
  hess.insert(1, 0) = 1.0;
  hess.insert(0, 1) = 1.0;
  SpMat jac(0, 2);
  BorderedSolver solver;
  solver.factorize(hess, jac);
  auto [dx, dy] = solver.solve(VecX::Ones(2), VecX::Zero(0));
  CHECK(std::isfinite(dx(0)));
  CHECK(std::isfinite(dx(1)));
  CHECK_THROWS_AS(solver.solve(VecX::Zero(3), VecX::Zero(0)), DimensionError);
}

TEST_CASE("the factorization pattern cache returns correct solutions on reuse") {
  auto p = testutil::random_nlp(5, 2, 2, 23);
  BorderedSolver solver;
  for (std::uint64_t k = 0; k < 3; ++k) {
    PrimalDualState s = random_interior_state(*p, 0.1 * k, 200 + k);
    Increment a = compute_increment(*p, s, 0.1 * k, 1.0, true, solver);
    Increment b = dense_full_increment(*p, s, 0.1 * k, 1.0, true);
    CHECK(testutil::increment_deviation(a, b) <= 1e-8);
  }
}

TEST_CASE("interior-point solve converges on random problems and stays interior") {
  for (std::uint64_t seed = 40; seed < 44; ++seed) {
    auto p = testutil::random_nlp(4, 1, 3, seed);
    SolveResult res = solve_converged(*p, 0.0);
    CAPTURE(seed);
    REQUIRE(res.converged);
    CHECK(res.state.strictly_interior());
    ResidualBundle r = kkt_residual(*p, res.state, 0.0);
    CHECK(std::max({r.lx.cwiseAbs().maxCoeff(), r.ly.cwiseAbs().maxCoeff(),
                    r.lw.cwiseAbs().maxCoeff(), r.lz.cwiseAbs().maxCoeff()}) <= 1e-6);
    CHECK(res.state.complementarity_gap() <= 1e-6);
  }
}

TEST_CASE("interior-point solve handles the bundled power flow cases") {
  Network toy = load_case(testutil::case_path("toy2.json"));
  auto sc_toy = std::make_shared<Scenario>(
      Scenario::make_synthetic(toy, "noon-peak", 0.02, 1, 0.0, 10.0, 2.5));
  OpfProblem p(make_ts_model(toy), sc_toy);
  SolveResult res = solve_converged(p, 4.0);
  REQUIRE(res.converged);
  CHECK(res.iterations <= 100);
  CHECK(res.state.strictly_interior());

  Network net = load_case(testutil::case_path("t2d3.json"));
  auto sc = std::make_shared<Scenario>(
      Scenario::make_synthetic(net, "noon-peak", 0.02, 1, 0.0, 10.0, 2.5));
  auto comp = partition_network(net, sc);
  SolveResult rc = solve_converged(*comp, 4.0);
  REQUIRE(rc.converged);
  CHECK(kkt_error(*comp, rc.state, 4.0) <= 1e-5);

  // non-interior states are rejected before any factorization
  PrimalDualState bad = interior_init(*comp, 4.0);
  bad.l(0) = -1.0;
  CHECK_THROWS_AS(condense_system(*comp, bad, 4.0, 1.0, false), SolverError);
}
