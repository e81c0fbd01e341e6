#pragma once

// Shared helpers for the unit tests and the acceptance runner: finite
// difference checks of NlpProblem callbacks and a generator of random
// quadratically-constrained problems.

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridtrack/nlp.hpp"
#include "gridtrack/pdipm.hpp"

namespace testutil {

using gridtrack::CallbackNlp;
using gridtrack::NlpProblem;
using gridtrack::SpMat;
using gridtrack::VecX;
using Mat = Eigen::MatrixXd;

inline std::string case_path(const std::string& name) {
  return std::string(GRIDTRACK_CASE_DIR) + "/" + name;
}

inline VecX fd_gradient(const std::function<double(const VecX&)>& fn, const VecX& x,
                        double eps = 1e-6) {
  VecX g(x.size());
  VecX p = x;
  for (int i = 0; i < x.size(); ++i) {
    p(i) = x(i) + eps;
    double hi = fn(p);
    p(i) = x(i) - eps;
    double lo = fn(p);
    p(i) = x(i);
    g(i) = (hi - lo) / (2.0 * eps);
  }
  return g;
}

inline Mat fd_jacobian(const std::function<VecX(const VecX&)>& fn, const VecX& x,
                       double eps = 1e-6) {
  VecX f0 = fn(x);
  Mat j(f0.size(), x.size());
  VecX p = x;
  for (int i = 0; i < x.size(); ++i) {
    p(i) = x(i) + eps;
    VecX hi = fn(p);
    p(i) = x(i) - eps;
    VecX lo = fn(p);
    p(i) = x(i);
    j.col(i) = (hi - lo) / (2.0 * eps);
  }
  return j;
}

inline double rel_dev(const Mat& a, const Mat& b) {
  double scale = 1.0 + b.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

inline double rel_dev(const VecX& a, const VecX& b) {
  if (a.size() == 0 && b.size() == 0) return 0.0;
  double scale = 1.0 + (b.size() ? b.cwiseAbs().maxCoeff() : 0.0);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

// Checks every analytic derivative callback of `p` against central finite
// differences at (x, t). Returns the largest relative deviation.
inline double max_derivative_deviation(const NlpProblem& p, const VecX& x, double t) {
  const int n = p.num_vars(), m = p.num_eq(), r = p.num_ineq();
  double worst = 0.0;
  auto track = [&worst](double d) { worst = std::max(worst, d); };

  track(rel_dev(fd_gradient([&](const VecX& v) { return p.objective(v, t); }, x),
                p.grad_objective(x, t)));
  track(rel_dev(
      fd_jacobian([&](const VecX& v) { return p.grad_objective(v, t); }, x),
      Mat(p.hess_objective(x, t))));

  if (m > 0) {
    track(rel_dev(
        fd_jacobian([&](const VecX& v) { return p.eq_constraints(v, t); }, x),
        Mat(p.eq_jacobian(x, t))));
    VecX y(m);
    for (int i = 0; i < m; ++i) y(i) = 0.5 * std::sin(i + 1.0);
    track(rel_dev(
        fd_jacobian(
            [&](const VecX& v) { return VecX(p.eq_jacobian(v, t).transpose() * y); },
            x),
        Mat(p.eq_hessian_sum(x, t, y))));
  }
  if (r > 0) {
    track(rel_dev(
        fd_jacobian([&](const VecX& v) { return p.ineq_constraints(v, t); }, x),
        Mat(p.ineq_jacobian(x, t))));
    VecX s(r);
    for (int i = 0; i < r; ++i) s(i) = 0.5 * std::cos(i + 1.0);
    track(rel_dev(
        fd_jacobian(
            [&](const VecX& v) {
              return VecX(p.ineq_jacobian(v, t).transpose() * s);
            },
            x),
        Mat(p.ineq_hessian_sum(x, t, s))));
  }

  const double dt = 1e-5;
  auto fd_t = [&](const std::function<VecX(double)>& fn) {
    return VecX((fn(t + dt) - fn(t - dt)) / (2.0 * dt));
  };
  if (m > 0)
    track(rel_dev(fd_t([&](double tt) { return p.eq_constraints(x, tt); }),
                  p.eq_time_derivative(x, t)));
  if (r > 0)
    track(rel_dev(fd_t([&](double tt) { return p.ineq_constraints(x, tt); }),
                  p.ineq_time_derivative(x, t)));
  track(rel_dev(fd_t([&](double tt) { return p.grad_objective(x, tt); }),
                p.grad_objective_time_derivative(x, t)));
  return worst;
}

// Random time-varying NLP with quadratic objective and quadratic constraints;
// bounds are centered on the constraint values at the initial point so random
// interior states stay well scaled.
inline std::shared_ptr<CallbackNlp> random_nlp(int n, int m, int r,
                                               std::uint64_t seed) {
  struct Data {
    Mat q;
    VecX c, s, x0;
    std::vector<Mat> gq, hq;
    std::vector<VecX> gl, hl;
    VecX gt, ht, g0;
  };
  auto d = std::make_shared<Data>();
  gridtrack::SplitMix64 rng(seed);
  auto rand_vec = [&rng](int len, double amp) {
    VecX v(len);
    for (int i = 0; i < len; ++i) v(i) = amp * rng.symmetric();
    return v;
  };
  auto rand_sym = [&rng](int len, double amp) {
    Mat a(len, len);
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < len; ++j) a(i, j) = amp * rng.symmetric();
    return Mat(0.5 * (a + a.transpose()));
  };

  Mat a = rand_sym(n, 1.0);
  d->q = a.transpose() * a / n + Mat::Identity(n, n);
  d->c = rand_vec(n, 1.0);
  d->s = rand_vec(n, 0.5);
  d->x0 = rand_vec(n, 0.5);
  d->gt = rand_vec(m, 0.3);
  d->ht = rand_vec(r, 0.3);
  for (int i = 0; i < m; ++i) {
    d->gq.push_back(rand_sym(n, 0.3));
    d->gl.push_back(rand_vec(n, 1.0));
  }
  for (int j = 0; j < r; ++j) {
    d->hq.push_back(rand_sym(n, 0.3));
    d->hl.push_back(rand_vec(n, 1.0));
  }
  auto raw_g = [d](const VecX& x, double t) {
    VecX g(d->gq.size());
    for (size_t i = 0; i < d->gq.size(); ++i)
      g(i) = 0.5 * x.dot(d->gq[i] * x) + d->gl[i].dot(x) + d->gt(i) * t;
    return g;
  };
  auto raw_h = [d](const VecX& x, double t) {
    VecX h(d->hq.size());
    for (size_t j = 0; j < d->hq.size(); ++j)
      h(j) = 0.5 * x.dot(d->hq[j] * x) + d->hl[j].dot(x) + d->ht(j) * t;
    return h;
  };
  d->g0 = raw_g(d->x0, 0.0);
  VecX h0 = raw_h(d->x0, 0.0);

  auto p = std::make_shared<CallbackNlp>();
  p->n = n;
  p->m_eq = m;
  p->m_ineq = r;
  p->x0 = d->x0;
  p->lb = VecX(r);
  p->ub = VecX(r);
  for (int j = 0; j < r; ++j) {
    p->lb(j) = h0(j) - (0.6 + 0.4 * rng.uniform());
    p->ub(j) = h0(j) + (0.6 + 0.4 * rng.uniform());
  }
  p->f = [d](const VecX& x, double t) {
    return 0.5 * x.dot(d->q * x) + d->c.dot(x) + t * d->s.dot(x);
  };
  p->grad_f = [d](const VecX& x, double t) { return VecX(d->q * x + d->c + t * d->s); };
  p->hess_f = [d](const VecX&, double) { return SpMat(d->q.sparseView()); };
  p->g = [d, raw_g](const VecX& x, double t) { return VecX(raw_g(x, t) - d->g0); };
  p->jac_g = [d](const VecX& x, double) {
    Mat j(d->gq.size(), x.size());
    for (size_t i = 0; i < d->gq.size(); ++i)
      j.row(i) = (d->gq[i] * x + d->gl[i]).transpose();
    return SpMat(j.sparseView());
  };
  p->hess_g_sum = [d](const VecX& x, double, const VecX& y) {
    Mat h = Mat::Zero(x.size(), x.size());
    for (size_t i = 0; i < d->gq.size(); ++i) h += y(i) * d->gq[i];
    return SpMat(h.sparseView());
  };
  p->h = raw_h;
  p->jac_h = [d](const VecX& x, double) {
    Mat j(d->hq.size(), x.size());
    for (size_t i = 0; i < d->hq.size(); ++i)
      j.row(i) = (d->hq[i] * x + d->hl[i]).transpose();
    return SpMat(j.sparseView());
  };
  p->hess_h_sum = [d](const VecX& x, double, const VecX& s) {
    Mat h = Mat::Zero(x.size(), x.size());
    for (size_t i = 0; i < d->hq.size(); ++i) h += s(i) * d->hq[i];
    return SpMat(h.sparseView());
  };
  p->dg_dt = [d](const VecX&, double) { return d->gt; };
  p->dh_dt = [d](const VecX&, double) { return d->ht; };
  p->dgrad_f_dt = [d](const VecX&, double) { return d->s; };
  return p;
}

inline double increment_deviation(const gridtrack::Increment& a,
                                  const gridtrack::Increment& b) {
  return std::max({rel_dev(a.dx, b.dx), rel_dev(a.dy, b.dy), rel_dev(a.dw, b.dw),
                   rel_dev(a.dz, b.dz), rel_dev(a.du, b.du), rel_dev(a.dl, b.dl)});
}

}  // namespace testutil
