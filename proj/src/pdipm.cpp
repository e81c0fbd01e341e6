#include "gridtrack/pdipm.hpp"

#include <algorithm>
#include <cmath>

namespace gridtrack {

namespace {

SpMat bordered_matrix(const SpMat& hess, const SpMat& jac_eq, double reg) {
  const int n = static_cast<int>(hess.rows());
  const int m = static_cast<int>(jac_eq.rows());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(hess.nonZeros() + 2 * jac_eq.nonZeros() + (reg != 0.0 ? n + m : 0));
  for (int k = 0; k < hess.outerSize(); ++k)
    for (SpMat::InnerIterator it(hess, k); it; ++it)
      trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                        it.value());
  for (int k = 0; k < jac_eq.outerSize(); ++k)
    for (SpMat::InnerIterator it(jac_eq, k); it; ++it) {
      int r = static_cast<int>(it.row()), c = static_cast<int>(it.col());
      trip.emplace_back(n + r, c, it.value());
      trip.emplace_back(c, n + r, it.value());
    }
  if (reg != 0.0) {
    for (int i = 0; i < n; ++i) trip.emplace_back(i, i, reg);
    for (int i = 0; i < m; ++i) trip.emplace_back(n + i, n + i, -reg);
  }
  SpMat a(n + m, n + m);
  a.setFromTriplets(trip.begin(), trip.end());
  return a;
}

}  // namespace

CondensedSystem condense_system(const NlpProblem& p, const PrimalDualState& s,
                                double t, double alpha, bool prediction) {
  check_dimensions(p, s);
  if (!s.strictly_interior())
    throw SolverError("interior-point state is not strictly interior");

  ResidualBundle res = kkt_residual(p, s, t);
  CondensedSystem c;
  c.jac_ineq = p.ineq_jacobian(s.x, t);

  VecX rx = alpha * res.lx;
  VecX ry = alpha * res.ly;
  c.rw = alpha * res.lw;
  c.rz = alpha * res.lz;
  c.ru = alpha * res.lu;
  c.rl = alpha * res.ll;
  if (prediction) {
    kkt_time_derivative(p, s, t, res);
    rx += res.lx_t;
    ry += res.ly_t;
    c.rw += res.lw_t;
    c.rz += res.lz_t;
    // the barrier is frozen during prediction, so ru and rl gain nothing
  }

  SpMat hess = p.hess_objective(s.x, t) + p.eq_hessian_sum(s.x, t, s.y) -
               p.ineq_hessian_sum(s.x, t, VecX(s.w + s.z));
  if (p.num_ineq() > 0) {
    VecX d = s.z.cwiseQuotient(s.l) - s.w.cwiseQuotient(s.u);
    hess += SpMat(c.jac_ineq.transpose() * d.asDiagonal() * c.jac_ineq);
    VecX q = -c.ru.cwiseQuotient(s.u) + s.w.cwiseQuotient(s.u).cwiseProduct(c.rw) -
             c.rl.cwiseQuotient(s.l) - s.z.cwiseQuotient(s.l).cwiseProduct(c.rz);
    c.sys.rx = -rx + c.jac_ineq.transpose() * q;
  } else {
    c.sys.rx = -rx;
  }
  c.sys.hess = std::move(hess);
  c.sys.jac_eq = p.eq_jacobian(s.x, t);
  c.sys.ry = -ry;
  return c;
}

Increment recover_blocks(const CondensedSystem& c, const PrimalDualState& s,
                         VecX dx, VecX dy) {
  Increment inc;
  inc.dx = std::move(dx);
  inc.dy = std::move(dy);
  if (s.u.size() > 0) {
    VecX jhdx = c.jac_ineq * inc.dx;
    inc.du = -c.rw - jhdx;
    inc.dl = c.rz + jhdx;
    inc.dw = -(c.ru + s.w.cwiseProduct(inc.du)).cwiseQuotient(s.u);
    inc.dz = -(c.rl + s.z.cwiseProduct(inc.dl)).cwiseQuotient(s.l);
  } else {
    inc.du = inc.dl = inc.dw = inc.dz = VecX::Zero(0);
  }
  return inc;
}

void BorderedSolver::factorize(const SpMat& hess, const SpMat& jac_eq) {
  n_ = static_cast<int>(hess.rows());
  m_ = static_cast<int>(jac_eq.rows());
  SpMat a = bordered_matrix(hess, jac_eq, 0.0);
  a.makeCompressed();
  if (a.nonZeros() != pattern_nnz_) {
    lu_->analyzePattern(a);
    pattern_nnz_ = a.nonZeros();
  }
  lu_->factorize(a);
  if (lu_->info() != Eigen::Success) {
    SpMat ar = bordered_matrix(hess, jac_eq, reg_);
    ar.makeCompressed();
    lu_->analyzePattern(ar);
    pattern_nnz_ = -1;  // pattern changed; re-analyze next time
    lu_->factorize(ar);
    if (lu_->info() != Eigen::Success)
      throw SolverError("bordered system is singular even after regularization");
  }
  ready_ = true;
}

std::pair<VecX, VecX> BorderedSolver::solve(const VecX& rx, const VecX& ry) const {
  if (!ready_) throw SolverError("bordered solver used before factorization");
  if (rx.size() != n_ || ry.size() != m_)
    throw DimensionError("bordered right-hand side has wrong dimensions");
  VecX rhs(n_ + m_);
  rhs << rx, ry;
  VecX sol = lu_->solve(rhs);
  return {sol.head(n_), sol.tail(m_)};
}

ReducedSystem assemble_reduced(const NlpProblem& p, const PrimalDualState& s,
                               double t, double alpha, bool prediction) {
  return condense_system(p, s, t, alpha, prediction).sys;
}

Increment compute_increment(const NlpProblem& p, const PrimalDualState& s, double t,
                            double alpha, bool prediction, BorderedSolver& solver) {
  CondensedSystem c = condense_system(p, s, t, alpha, prediction);
  solver.factorize(c.sys.hess, c.sys.jac_eq);
  auto [dx, dy] = solver.solve(c.sys.rx, c.sys.ry);
  return recover_blocks(c, s, std::move(dx), std::move(dy));
}

StepLengths step_lengths(const PrimalDualState& s, const Increment& inc,
                         double gamma) {
  StepLengths sl;
  auto limit = [gamma](const VecX& v, const VecX& dv, double& alpha) {
    for (int i = 0; i < v.size(); ++i)
      if (dv(i) < 0.0) alpha = std::min(alpha, -gamma * v(i) / dv(i));
  };
  limit(s.u, inc.du, sl.alpha_p);
  limit(s.l, inc.dl, sl.alpha_p);
  limit(s.z, inc.dz, sl.alpha_d);
  VecX neg_w = -s.w, neg_dw = -inc.dw;
  limit(neg_w, neg_dw, sl.alpha_d);
  return sl;
}

void apply_step(PrimalDualState& s, const Increment& inc, const StepLengths& sl) {
  s.x += sl.alpha_p * inc.dx;
  s.u += sl.alpha_p * inc.du;
  s.l += sl.alpha_p * inc.dl;
  s.y += sl.alpha_d * inc.dy;
  s.w += sl.alpha_d * inc.dw;
  s.z += sl.alpha_d * inc.dz;
}

double barrier_update(const PrimalDualState& s, double sigma) {
  const int r = static_cast<int>(s.u.size());
  if (r == 0) return 0.0;
  return sigma * s.complementarity_gap() / (2.0 * r);
}

PrimalDualState interior_init(const NlpProblem& p, double t, const PdipmOptions& opt) {
  PrimalDualState s;
  s.x = p.initial_primal(t);
  s.y = VecX::Zero(p.num_eq());
  s.mu = opt.mu0;
  const int r = p.num_ineq();
  if (r > 0) {
    VecX h = p.ineq_constraints(s.x, t);
    s.u = (p.ineq_upper() - h).cwiseMax(opt.slack_floor);
    s.l = (h - p.ineq_lower()).cwiseMax(opt.slack_floor);
    s.z = opt.mu0 * s.l.cwiseInverse();
    s.w = -opt.mu0 * s.u.cwiseInverse();
  } else {
    s.u = s.l = s.z = s.w = VecX::Zero(0);
  }
  return s;
}

SolveResult solve_converged(const NlpProblem& p, double t, const PdipmOptions& opt) {
  SolveResult out;
  out.state = interior_init(p, t, opt);
  BorderedSolver solver;
  for (int it = 0; it < opt.max_iter; ++it) {
    ResidualBundle res = kkt_residual(p, out.state, t);
    double gap = out.state.complementarity_gap();
    auto nrm = [](const VecX& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; };
    double err = std::max({nrm(res.lx), nrm(res.ly), nrm(res.lw), nrm(res.lz)});
    if (err <= opt.eps_kkt && gap <= opt.eps_gap) {
      out.iterations = it;
      out.converged = true;
      return out;
    }
    out.state.mu = barrier_update(out.state, opt.sigma);
    Increment inc = compute_increment(p, out.state, t, 1.0, false, solver);
    apply_step(out.state, inc, step_lengths(out.state, inc, opt.gamma));
  }
  out.iterations = opt.max_iter;
  return out;
}

}  // namespace gridtrack
