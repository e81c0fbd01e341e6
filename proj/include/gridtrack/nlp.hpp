#pragma once

#include <functional>
#include <memory>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gridtrack/util.hpp"

namespace gridtrack {

using SpMat = Eigen::SparseMatrix<double>;
using VecX = Eigen::VectorXd;

// Time-varying NLP:  min f(x,t)  s.t.  g(x,t) = 0,  lb <= h(x,t) <= ub.
// Inequality bounds are constant; moving bounds are folded into h itself.
class NlpProblem {
 public:
  virtual ~NlpProblem() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;

  virtual const VecX& ineq_lower() const = 0;
  virtual const VecX& ineq_upper() const = 0;

  virtual double objective(const VecX& x, double t) const = 0;
  virtual VecX grad_objective(const VecX& x, double t) const = 0;
  virtual SpMat hess_objective(const VecX& x, double t) const = 0;

  virtual VecX eq_constraints(const VecX& x, double t) const = 0;
  virtual SpMat eq_jacobian(const VecX& x, double t) const = 0;
  // sum_m y_m * hess(g_m)
  virtual SpMat eq_hessian_sum(const VecX& x, double t, const VecX& y) const = 0;

  virtual VecX ineq_constraints(const VecX& x, double t) const = 0;
  virtual SpMat ineq_jacobian(const VecX& x, double t) const = 0;
  // sum_m s_m * hess(h_m)
  virtual SpMat ineq_hessian_sum(const VecX& x, double t, const VecX& s) const = 0;

  // Partial time derivatives at fixed x, through the parameter profiles.
  virtual VecX eq_time_derivative(const VecX& x, double t) const = 0;
  virtual VecX ineq_time_derivative(const VecX& x, double t) const = 0;
  virtual VecX grad_objective_time_derivative(const VecX& x, double t) const = 0;

  virtual VecX initial_primal(double t) const = 0;
};

// Aggregate primal-dual point lambda = [x; y; w; z; u; l] and barrier mu.
// Interior iterates keep u, l, z > 0 and w < 0.
struct PrimalDualState {
  VecX x, y, w, z, u, l;
  double mu = 1.0;

  bool strictly_interior() const {
    return (u.size() == 0 || u.minCoeff() > 0.0) &&
           (l.size() == 0 || l.minCoeff() > 0.0) &&
           (z.size() == 0 || z.minCoeff() > 0.0) &&
           (w.size() == 0 || w.maxCoeff() < 0.0);
  }

  // l'z - u'w, strictly positive on interior points.
  double complementarity_gap() const { return l.dot(z) - u.dot(w); }

  double max_abs_diff(const PrimalDualState& o) const;
};

// Residual convention (fixed; all tests pin it):
//   L_x = grad f + Jg' y - Jh' (w + z)
//   L_y = g
//   L_w = h + u - ub
//   L_z = h - l - lb
//   L_u = U w + mu 1
//   L_l = L z - mu 1
// and the *_t blocks are the partial time derivatives at fixed lambda
// (mu is treated as frozen, so L_ut = L_lt = 0).
struct ResidualBundle {
  VecX lx, ly, lw, lz, lu, ll;
  VecX lx_t, ly_t, lw_t, lz_t;

  double inf_norm() const;
};

ResidualBundle kkt_residual(const NlpProblem& p, const PrimalDualState& s, double t);
void kkt_time_derivative(const NlpProblem& p, const PrimalDualState& s, double t,
                         ResidualBundle& res);
double kkt_error(const NlpProblem& p, const PrimalDualState& s, double t);

void check_dimensions(const NlpProblem& p, const PrimalDualState& s);

// Small adapter for hand-built problems in tests and verification paths.
// Unset callbacks default to empty/zero quantities of consistent dimension.
class CallbackNlp : public NlpProblem {
 public:
  int n = 0, m_eq = 0, m_ineq = 0;
  VecX lb, ub;
  std::function<double(const VecX&, double)> f;
  std::function<VecX(const VecX&, double)> grad_f;
  std::function<SpMat(const VecX&, double)> hess_f;
  std::function<VecX(const VecX&, double)> g;
  std::function<SpMat(const VecX&, double)> jac_g;
  std::function<SpMat(const VecX&, double, const VecX&)> hess_g_sum;
  std::function<VecX(const VecX&, double)> h;
  std::function<SpMat(const VecX&, double)> jac_h;
  std::function<SpMat(const VecX&, double, const VecX&)> hess_h_sum;
  std::function<VecX(const VecX&, double)> dg_dt;
  std::function<VecX(const VecX&, double)> dh_dt;
  std::function<VecX(const VecX&, double)> dgrad_f_dt;
  VecX x0;

  int num_vars() const override { return n; }
  int num_eq() const override { return m_eq; }
  int num_ineq() const override { return m_ineq; }
  const VecX& ineq_lower() const override { return lb; }
  const VecX& ineq_upper() const override { return ub; }
  double objective(const VecX& x, double t) const override { return f ? f(x, t) : 0.0; }
  VecX grad_objective(const VecX& x, double t) const override {
    return grad_f ? grad_f(x, t) : VecX::Zero(n);
  }
  SpMat hess_objective(const VecX& x, double t) const override {
    return hess_f ? hess_f(x, t) : SpMat(n, n);
  }
  VecX eq_constraints(const VecX& x, double t) const override {
    return g ? g(x, t) : VecX::Zero(m_eq);
  }
  SpMat eq_jacobian(const VecX& x, double t) const override {
    return jac_g ? jac_g(x, t) : SpMat(m_eq, n);
  }
  SpMat eq_hessian_sum(const VecX& x, double t, const VecX& y) const override {
    return hess_g_sum ? hess_g_sum(x, t, y) : SpMat(n, n);
  }
  VecX ineq_constraints(const VecX& x, double t) const override {
    return h ? h(x, t) : VecX::Zero(m_ineq);
  }
  SpMat ineq_jacobian(const VecX& x, double t) const override {
    return jac_h ? jac_h(x, t) : SpMat(m_ineq, n);
  }
  SpMat ineq_hessian_sum(const VecX& x, double t, const VecX& s) const override {
    return hess_h_sum ? hess_h_sum(x, t, s) : SpMat(n, n);
  }
  VecX eq_time_derivative(const VecX& x, double t) const override {
    return dg_dt ? dg_dt(x, t) : VecX::Zero(m_eq);
  }
  VecX ineq_time_derivative(const VecX& x, double t) const override {
    return dh_dt ? dh_dt(x, t) : VecX::Zero(m_ineq);
  }
  VecX grad_objective_time_derivative(const VecX& x, double t) const override {
    return dgrad_f_dt ? dgrad_f_dt(x, t) : VecX::Zero(n);
  }
  VecX initial_primal(double) const override {
    return x0.size() == n ? x0 : VecX::Zero(n);
  }
};

}  // namespace gridtrack
