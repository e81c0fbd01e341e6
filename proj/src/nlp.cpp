#include "gridtrack/nlp.hpp"

#include <algorithm>

namespace gridtrack {

double PrimalDualState::max_abs_diff(const PrimalDualState& o) const {
  auto block = [](const VecX& a, const VecX& b) {
    return a.size() ? (a - b).cwiseAbs().maxCoeff() : 0.0;
  };
  return std::max({block(x, o.x), block(y, o.y), block(w, o.w), block(z, o.z),
                   block(u, o.u), block(l, o.l)});
}

double ResidualBundle::inf_norm() const {
  auto nrm = [](const VecX& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
  return std::max({nrm(lx), nrm(ly), nrm(lw), nrm(lz), nrm(lu), nrm(ll)});
}

void check_dimensions(const NlpProblem& p, const PrimalDualState& s) {
  if (s.x.size() != p.num_vars() || s.y.size() != p.num_eq() ||
      s.w.size() != p.num_ineq() || s.z.size() != p.num_ineq() ||
      s.u.size() != p.num_ineq() || s.l.size() != p.num_ineq())
    throw DimensionError("primal-dual state does not match problem dimensions");
}

ResidualBundle kkt_residual(const NlpProblem& p, const PrimalDualState& s, double t) {
  check_dimensions(p, s);
  ResidualBundle r;
  VecX h = p.ineq_constraints(s.x, t);
  SpMat jg = p.eq_jacobian(s.x, t);
  SpMat jh = p.ineq_jacobian(s.x, t);
  r.lx = p.grad_objective(s.x, t) + jg.transpose() * s.y - jh.transpose() * (s.w + s.z);
  r.ly = p.eq_constraints(s.x, t);
  r.lw = h + s.u - p.ineq_upper();
  r.lz = h - s.l - p.ineq_lower();
  r.lu = s.u.cwiseProduct(s.w).array() + s.mu;
  r.ll = s.l.cwiseProduct(s.z).array() - s.mu;
  return r;
}

void kkt_time_derivative(const NlpProblem& p, const PrimalDualState& s, double t,
                         ResidualBundle& res) {
  res.lx_t = p.grad_objective_time_derivative(s.x, t);
  res.ly_t = p.eq_time_derivative(s.x, t);
  VecX ht = p.ineq_time_derivative(s.x, t);
  res.lw_t = ht;
  res.lz_t = std::move(ht);
}

double kkt_error(const NlpProblem& p, const PrimalDualState& s, double t) {
  return kkt_residual(p, s, t).inf_norm();
}

}  // namespace gridtrack
