#include <doctest.h>

#include "gridtrack/nlp.hpp"
#include "helpers.hpp"

using namespace gridtrack;

namespace {

// n = 1, f = (x-3)^2, g = x - 1, h = x in [-1, 2]
CallbackNlp pinned_problem() {
  CallbackNlp p;
  p.n = 1;
  p.m_eq = 1;
  p.m_ineq = 1;
  p.lb = VecX::Constant(1, -1.0);
  p.ub = VecX::Constant(1, 2.0);
  p.f = [](const VecX& x, double) { return (x(0) - 3.0) * (x(0) - 3.0); };
  p.grad_f = [](const VecX& x, double) {
    return VecX::Constant(1, 2.0 * (x(0) - 3.0));
  };
  p.hess_f = [](const VecX&, double) {
    SpMat h(1, 1);
    h.insert(0, 0) = 2.0;
    return h;
  };
  p.g = [](const VecX& x, double) { return VecX::Constant(1, x(0) - 1.0); };
  p.jac_g = [](const VecX&, double) {
    SpMat j(1, 1);
    j.insert(0, 0) = 1.0;
    return j;
  };
  p.h = [](const VecX& x, double) { return x; };
  p.jac_h = [](const VecX&, double) {
    SpMat j(1, 1);
    j.insert(0, 0) = 1.0;
    return j;
  };
  return p;
}

}  // namespace

TEST_CASE("residual blocks follow the pinned sign convention") {
  CallbackNlp p = pinned_problem();
  PrimalDualState s;
  s.x = VecX::Zero(1);
  s.y = VecX::Constant(1, 2.0);
  s.w = VecX::Constant(1, -0.5);
  s.z = VecX::Constant(1, 0.3);
  s.u = VecX::Constant(1, 1.5);
  s.l = VecX::Constant(1, 0.8);
  s.mu = 0.1;

  ResidualBundle r = kkt_residual(p, s, 0.0);
  // L_x = grad f + Jg' y - Jh' (w + z) = -6 + 2 - (-0.2)
  CHECK(r.lx(0) == doctest::Approx(-3.8));
  CHECK(r.ly(0) == doctest::Approx(-1.0));
  CHECK(r.lw(0) == doctest::Approx(0.0 + 1.5 - 2.0));
  CHECK(r.lz(0) == doctest::Approx(0.0 - 0.8 + 1.0));
  CHECK(r.lu(0) == doctest::Approx(1.5 * -0.5 + 0.1));
  CHECK(r.ll(0) == doctest::Approx(0.8 * 0.3 - 0.1));
  CHECK(r.inf_norm() == doctest::Approx(3.8));
  CHECK(kkt_error(p, s, 0.0) == doctest::Approx(3.8));

  CHECK(s.strictly_interior());
  CHECK(s.complementarity_gap() == doctest::Approx(0.8 * 0.3 + 1.5 * 0.5));

  // unconstrained variant: L_x = grad f alone
  CallbackNlp q;
  q.n = 1;
  q.f = p.f;
  q.grad_f = p.grad_f;
  PrimalDualState sq;
  sq.x = VecX::Zero(1);
  sq.y = sq.w = sq.z = sq.u = sq.l = VecX::Zero(0);
  CHECK(kkt_residual(q, sq, 0.0).lx(0) == doctest::Approx(-6.0));
}

TEST_CASE("time-derivative blocks vanish for constant problems") {
  CallbackNlp p = pinned_problem();
  PrimalDualState s;
  s.x = VecX::Zero(1);
  s.y = VecX::Constant(1, 1.0);
  s.w = VecX::Constant(1, -1.0);
  s.z = s.u = s.l = VecX::Constant(1, 1.0);
  ResidualBundle r = kkt_residual(p, s, 0.0);
  kkt_time_derivative(p, s, 0.0, r);
  CHECK(r.lx_t.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.ly_t.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.lw_t.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.lz_t.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dimension mismatches are rejected") {
  CallbackNlp p = pinned_problem();
  PrimalDualState s;
  s.x = VecX::Zero(1);
  s.y = VecX::Zero(2);  // wrong
  s.w = s.z = s.u = s.l = VecX::Constant(1, 1.0);
  CHECK_THROWS_AS(check_dimensions(p, s), DimensionError);
  CHECK_THROWS_AS(kkt_residual(p, s, 0.0), DimensionError);
}

TEST_CASE("interiority predicate is strict in every block") {
  PrimalDualState s;
  s.x = s.y = VecX::Zero(0);
  s.u = s.l = s.z = VecX::Constant(2, 0.5);
  s.w = VecX::Constant(2, -0.5);
  CHECK(s.strictly_interior());
  s.w(1) = 0.0;
  CHECK_FALSE(s.strictly_interior());
  s.w(1) = -0.5;
  s.l(0) = 0.0;
  CHECK_FALSE(s.strictly_interior());
}

TEST_CASE("random problems have consistent analytic derivatives") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto p = testutil::random_nlp(5, 2, 3, seed);
    VecX x = p->initial_primal(0.3);
    SplitMix64 rng(seed + 100);
    for (int i = 0; i < x.size(); ++i) x(i) += 0.2 * rng.symmetric();
    CHECK(testutil::max_derivative_deviation(*p, x, 0.3) <= 1e-5);
  }
}
