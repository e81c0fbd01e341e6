#include "gridtrack/opf_problem.hpp"

#include <cmath>
#include <functional>

namespace gridtrack {

namespace {

// Flow from terminal i of a branch and its partials wrt (ei, fi, ej, fj).
struct FlowEval {
  double p, q;
  double dp[4], dq[4];
};

FlowEval flow_from(double ei, double fi, double ej, double fj, double g, double b) {
  FlowEval r;
  r.p = g * (ei * ei + fi * fi) - g * (ei * ej + fi * fj) + b * (ei * fj - ej * fi);
  r.q = -b * (ei * ei + fi * fi) + b * (ei * ej + fi * fj) + g * (ei * fj - ej * fi);
  r.dp[0] = 2 * g * ei - g * ej + b * fj;
  r.dp[1] = 2 * g * fi - g * fj - b * ej;
  r.dp[2] = -g * ei - b * fi;
  r.dp[3] = -g * fi + b * ei;
  r.dq[0] = -2 * b * ei + b * ej + g * fj;
  r.dq[1] = -2 * b * fi + b * fj - g * ej;
  r.dq[2] = b * ei - g * fi;
  r.dq[3] = b * fi + g * ei;
  return r;
}

// Constant Hessians of P_ij and Q_ij over (ei, fi, ej, fj).
void flow_hessians(double g, double b, double hp[4][4], double hq[4][4]) {
  const double HP[4][4] = {{2 * g, 0, -g, b}, {0, 2 * g, -b, -g}, {-g, -b, 0, 0},
                           {b, -g, 0, 0}};
  const double HQ[4][4] = {{-2 * b, 0, b, g}, {0, -2 * b, -g, b}, {b, -g, 0, 0},
                           {g, b, 0, 0}};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      hp[i][j] = HP[i][j];
      hq[i][j] = HQ[i][j];
    }
}

}  // namespace

OpfProblem::OpfProblem(OpfModel model, std::shared_ptr<const Scenario> scenario)
    : model_(std::move(model)), scen_(std::move(scenario)) {
  const int nb = static_cast<int>(model_.buses.size());
  ev_.assign(nb, -1);
  fv_.assign(nb, -1);
  for (int i = 0; i < nb; ++i) {
    if (model_.buses[i].pinned) continue;
    ev_[i] = n_++;
    fv_[i] = n_++;
  }
  for (size_t k = 0; k < model_.gens.size(); ++k) {
    pg_.push_back(n_++);
    qg_.push_back(n_++);
  }
  for (size_t k = 0; k < model_.res.size(); ++k) {
    pr_.push_back(n_++);
    qr_.push_back(n_++);
  }
  for (const auto& tie : model_.ties) {
    pt_.push_back(tie.fixed ? -1 : n_++);
    qt_.push_back(tie.fixed ? -1 : n_++);
  }

  m_eq_ = 2 * nb;
  if (model_.slack_bus >= 0) {
    if (model_.buses[model_.slack_bus].pinned)
      throw ValidationError(model_.name + ": slack bus must not be pinned");
    m_eq_ += 1;
  }

  // Profile lookups are resolved once here so a missing profile is reported
  // at build time, naming the bus.
  for (const auto& bus : model_.buses) bus_load_.push_back(&scen_->load(bus.key));
  for (const auto& r : model_.res) res_pav_.push_back(&scen_->pav(r.key));

  // Inequality layout: generators, then per-RES blocks, then voltage
  // magnitudes, then line flows. One-sided rows get the loose opposite bound.
  std::vector<double> lb, ub;
  for (size_t k = 0; k < model_.gens.size(); ++k) {
    rows_.push_back({IneqRow::kGenP, static_cast<int>(k)});
    lb.push_back(model_.gens[k].pmin);
    ub.push_back(model_.gens[k].pmax);
  }
  for (size_t k = 0; k < model_.res.size(); ++k) {
    int ki = static_cast<int>(k);
    rows_.push_back({IneqRow::kResAvail, ki});
    lb.push_back(-kLooseBound);
    ub.push_back(0.0);
    rows_.push_back({IneqRow::kResPfUp, ki});
    lb.push_back(-kLooseBound);
    ub.push_back(0.0);
    rows_.push_back({IneqRow::kResPfLo, ki});
    lb.push_back(-kLooseBound);
    ub.push_back(0.0);
    rows_.push_back({IneqRow::kResApparent, ki});
    lb.push_back(-kLooseBound);
    ub.push_back(model_.res[k].s_rated * model_.res[k].s_rated);
  }
  for (int i = 0; i < nb; ++i) {
    if (!model_.buses[i].vlimit || model_.buses[i].pinned) continue;
    rows_.push_back({IneqRow::kVolt, i});
    lb.push_back(model_.buses[i].vmin * model_.buses[i].vmin);
    ub.push_back(model_.buses[i].vmax * model_.buses[i].vmax);
  }
  for (size_t k = 0; k < model_.branches.size(); ++k) {
    rows_.push_back({IneqRow::kLine, static_cast<int>(k)});
    lb.push_back(-kLooseBound);
    ub.push_back(model_.branches[k].smax * model_.branches[k].smax);
  }
  m_ineq_ = static_cast<int>(rows_.size());
  lb_ = Eigen::Map<VecX>(lb.data(), m_ineq_);
  ub_ = Eigen::Map<VecX>(ub.data(), m_ineq_);
}

double OpfProblem::objective(const VecX& x, double t) const {
  double cost = 0.0;
  for (size_t k = 0; k < model_.gens.size(); ++k) {
    const auto& g = model_.gens[k];
    double p = x(pg_[k]);
    cost += g.c2 * p * p + g.c1 * p + g.c0;
  }
  for (size_t k = 0; k < model_.res.size(); ++k) {
    const auto& r = model_.res[k];
    double pav = res_pav_[k]->eval(t).first;
    double dp = pav - x(pr_[k]);
    double q = x(qr_[k]);
    cost += r.cp * dp * dp + r.cq * q * q;
  }
  return cost;
}

VecX OpfProblem::grad_objective(const VecX& x, double t) const {
  VecX grad = VecX::Zero(n_);
  for (size_t k = 0; k < model_.gens.size(); ++k) {
    const auto& g = model_.gens[k];
    grad(pg_[k]) = 2.0 * g.c2 * x(pg_[k]) + g.c1;
  }
  for (size_t k = 0; k < model_.res.size(); ++k) {
    const auto& r = model_.res[k];
    double pav = res_pav_[k]->eval(t).first;
    grad(pr_[k]) = -2.0 * r.cp * (pav - x(pr_[k]));
    grad(qr_[k]) = 2.0 * r.cq * x(qr_[k]);
  }
  return grad;
}

SpMat OpfProblem::hess_objective(const VecX&, double) const {
  std::vector<Eigen::Triplet<double>> trip;
  for (size_t k = 0; k < model_.gens.size(); ++k)
    trip.emplace_back(pg_[k], pg_[k], 2.0 * model_.gens[k].c2);
  for (size_t k = 0; k < model_.res.size(); ++k) {
    trip.emplace_back(pr_[k], pr_[k], 2.0 * model_.res[k].cp);
    trip.emplace_back(qr_[k], qr_[k], 2.0 * model_.res[k].cq);
  }
  SpMat hess(n_, n_);
  hess.setFromTriplets(trip.begin(), trip.end());
  return hess;
}

VecX OpfProblem::eq_constraints(const VecX& x, double t) const {
  const int nb = static_cast<int>(model_.buses.size());
  VecX g = VecX::Zero(m_eq_);
  for (int i = 0; i < nb; ++i) {
    auto [pd, dpd] = bus_load_[i]->pd.eval(t);
    auto [qd, dqd] = bus_load_[i]->qd.eval(t);
    g(2 * i) = -pd;
    g(2 * i + 1) = -qd;
  }
  for (size_t k = 0; k < model_.gens.size(); ++k) {
    int i = model_.gens[k].bus;
    g(2 * i) += x(pg_[k]);
    g(2 * i + 1) += x(qg_[k]);
  }
  for (size_t k = 0; k < model_.res.size(); ++k) {
    int i = model_.res[k].bus;
    g(2 * i) += x(pr_[k]);
    g(2 * i + 1) += x(qr_[k]);
  }
  for (size_t k = 0; k < model_.ties.size(); ++k) {
    const auto& tie = model_.ties[k];
    double p = tie.fixed ? tie.fixed_p : x(pt_[k]);
    double q = tie.fixed ? tie.fixed_q : x(qt_[k]);
    g(2 * tie.bus) += tie.sign * p;
    g(2 * tie.bus + 1) += tie.sign * q;
  }
  for (const auto& br : model_.branches) {
    auto fwd = flow_from(bus_e(x, br.from), bus_f(x, br.from), bus_e(x, br.to),
                         bus_f(x, br.to), br.g, br.b);
    auto rev = flow_from(bus_e(x, br.to), bus_f(x, br.to), bus_e(x, br.from),
                         bus_f(x, br.from), br.g, br.b);
    g(2 * br.from) -= fwd.p;
    g(2 * br.from + 1) -= fwd.q;
    g(2 * br.to) -= rev.p;
    g(2 * br.to + 1) -= rev.q;
  }
  if (model_.slack_bus >= 0) g(2 * nb) = x(fv_[model_.slack_bus]);
  return g;
}

SpMat OpfProblem::eq_jacobian(const VecX& x, double t) const {
  (void)t;
  std::vector<Eigen::Triplet<double>> trip;
  auto add = [&trip](int row, int var, double val) {
    if (var >= 0) trip.emplace_back(row, var, val);
  };
  for (size_t k = 0; k < model_.gens.size(); ++k) {
    int i = model_.gens[k].bus;
    add(2 * i, pg_[k], 1.0);
    add(2 * i + 1, qg_[k], 1.0);
  }
  for (size_t k = 0; k < model_.res.size(); ++k) {
    int i = model_.res[k].bus;
    add(2 * i, pr_[k], 1.0);
    add(2 * i + 1, qr_[k], 1.0);
  }
  for (size_t k = 0; k < model_.ties.size(); ++k) {
    const auto& tie = model_.ties[k];
    add(2 * tie.bus, pt_[k], tie.sign);
    add(2 * tie.bus + 1, qt_[k], tie.sign);
  }
  for (const auto& br : model_.branches) {
    int a = br.from, b = br.to;
    int va[4] = {ev_[a], fv_[a], ev_[b], fv_[b]};
    int vb[4] = {ev_[b], fv_[b], ev_[a], fv_[a]};
    auto fwd = flow_from(bus_e(x, a), bus_f(x, a), bus_e(x, b), bus_f(x, b), br.g, br.b);
    auto rev = flow_from(bus_e(x, b), bus_f(x, b), bus_e(x, a), bus_f(x, a), br.g, br.b);
    for (int c = 0; c < 4; ++c) {
      add(2 * a, va[c], -fwd.dp[c]);
      add(2 * a + 1, va[c], -fwd.dq[c]);
      add(2 * b, vb[c], -rev.dp[c]);
      add(2 * b + 1, vb[c], -rev.dq[c]);
    }
  }
  if (model_.slack_bus >= 0)
    add(2 * static_cast<int>(model_.buses.size()), fv_[model_.slack_bus], 1.0);
  SpMat jac(m_eq_, n_);
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

SpMat OpfProblem::eq_hessian_sum(const VecX& x, double t, const VecX& y) const {
  (void)x;
  (void)t;
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& br : model_.branches) {
    double hp[4][4], hq[4][4];
    flow_hessians(br.g, br.b, hp, hq);
    int a = br.from, b = br.to;
    int va[4] = {ev_[a], fv_[a], ev_[b], fv_[b]};
    int vb[4] = {ev_[b], fv_[b], ev_[a], fv_[a]};
    double ya_p = -y(2 * a), ya_q = -y(2 * a + 1);
    double yb_p = -y(2 * b), yb_q = -y(2 * b + 1);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        if (va[i] >= 0 && va[j] >= 0)
          trip.emplace_back(va[i], va[j], ya_p * hp[i][j] + ya_q * hq[i][j]);
        if (vb[i] >= 0 && vb[j] >= 0)
          trip.emplace_back(vb[i], vb[j], yb_p * hp[i][j] + yb_q * hq[i][j]);
      }
  }
  SpMat hess(n_, n_);
  hess.setFromTriplets(trip.begin(), trip.end());
  return hess;
}

VecX OpfProblem::ineq_constraints(const VecX& x, double t) const {
  VecX h(m_ineq_);
  for (int m = 0; m < m_ineq_; ++m) {
    const auto& row = rows_[m];
    switch (row.kind) {
      case IneqRow::kGenP:
        h(m) = x(pg_[row.idx]);
        break;
      case IneqRow::kResAvail:
        h(m) = x(pr_[row.idx]) - res_pav_[row.idx]->eval(t).first;
        break;
      case IneqRow::kResPfUp:
        h(m) = x(qr_[row.idx]) - model_.res[row.idx].tan_theta * x(pr_[row.idx]);
        break;
      case IneqRow::kResPfLo:
        h(m) = -x(qr_[row.idx]) - model_.res[row.idx].tan_theta * x(pr_[row.idx]);
        break;
      case IneqRow::kResApparent: {
        double p = x(pr_[row.idx]), q = x(qr_[row.idx]);
        h(m) = p * p + q * q;
        break;
      }
      case IneqRow::kVolt: {
        double e = bus_e(x, row.idx), f = bus_f(x, row.idx);
        h(m) = e * e + f * f;
        break;
      }
      case IneqRow::kLine: {
        const auto& br = model_.branches[row.idx];
        auto fl = flow_from(bus_e(x, br.from), bus_f(x, br.from), bus_e(x, br.to),
                            bus_f(x, br.to), br.g, br.b);
        h(m) = fl.p * fl.p + fl.q * fl.q;
        break;
      }
    }
  }
  return h;
}

SpMat OpfProblem::ineq_jacobian(const VecX& x, double t) const {
  (void)t;
  std::vector<Eigen::Triplet<double>> trip;
  auto add = [&trip](int row, int var, double val) {
    if (var >= 0) trip.emplace_back(row, var, val);
  };
  for (int m = 0; m < m_ineq_; ++m) {
    const auto& row = rows_[m];
    switch (row.kind) {
      case IneqRow::kGenP:
        add(m, pg_[row.idx], 1.0);
        break;
      case IneqRow::kResAvail:
        add(m, pr_[row.idx], 1.0);
        break;
      case IneqRow::kResPfUp:
        add(m, qr_[row.idx], 1.0);
        add(m, pr_[row.idx], -model_.res[row.idx].tan_theta);
        break;
      case IneqRow::kResPfLo:
        add(m, qr_[row.idx], -1.0);
        add(m, pr_[row.idx], -model_.res[row.idx].tan_theta);
        break;
      case IneqRow::kResApparent:
        add(m, pr_[row.idx], 2.0 * x(pr_[row.idx]));
        add(m, qr_[row.idx], 2.0 * x(qr_[row.idx]));
        break;
      case IneqRow::kVolt:
        add(m, ev_[row.idx], 2.0 * bus_e(x, row.idx));
        add(m, fv_[row.idx], 2.0 * bus_f(x, row.idx));
        break;
      case IneqRow::kLine: {
        const auto& br = model_.branches[row.idx];
        int va[4] = {ev_[br.from], fv_[br.from], ev_[br.to], fv_[br.to]};
        auto fl = flow_from(bus_e(x, br.from), bus_f(x, br.from), bus_e(x, br.to),
                            bus_f(x, br.to), br.g, br.b);
        for (int c = 0; c < 4; ++c)
          add(m, va[c], 2.0 * fl.p * fl.dp[c] + 2.0 * fl.q * fl.dq[c]);
        break;
      }
    }
  }
  SpMat jac(m_ineq_, n_);
  jac.setFromTriplets(trip.begin(), trip.end());
  return jac;
}

SpMat OpfProblem::ineq_hessian_sum(const VecX& x, double t, const VecX& s) const {
  (void)t;
  std::vector<Eigen::Triplet<double>> trip;
  for (int m = 0; m < m_ineq_; ++m) {
    const auto& row = rows_[m];
    double sm = s(m);
    if (sm == 0.0) continue;
    switch (row.kind) {
      case IneqRow::kGenP:
      case IneqRow::kResAvail:
      case IneqRow::kResPfUp:
      case IneqRow::kResPfLo:
        break;  // linear rows
      case IneqRow::kResApparent:
        trip.emplace_back(pr_[row.idx], pr_[row.idx], 2.0 * sm);
        trip.emplace_back(qr_[row.idx], qr_[row.idx], 2.0 * sm);
        break;
      case IneqRow::kVolt:
        if (ev_[row.idx] >= 0) {
          trip.emplace_back(ev_[row.idx], ev_[row.idx], 2.0 * sm);
          trip.emplace_back(fv_[row.idx], fv_[row.idx], 2.0 * sm);
        }
        break;
      case IneqRow::kLine: {
        const auto& br = model_.branches[row.idx];
        int va[4] = {ev_[br.from], fv_[br.from], ev_[br.to], fv_[br.to]};
        auto fl = flow_from(bus_e(x, br.from), bus_f(x, br.from), bus_e(x, br.to),
                            bus_f(x, br.to), br.g, br.b);
        double hp[4][4], hq[4][4];
        flow_hessians(br.g, br.b, hp, hq);
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) {
            if (va[i] < 0 || va[j] < 0) continue;
            double v = 2.0 * (fl.dp[i] * fl.dp[j] + fl.p * hp[i][j] +
                              fl.dq[i] * fl.dq[j] + fl.q * hq[i][j]);
            trip.emplace_back(va[i], va[j], sm * v);
          }
        break;
      }
    }
  }
  SpMat hess(n_, n_);
  hess.setFromTriplets(trip.begin(), trip.end());
  return hess;
}

VecX OpfProblem::eq_time_derivative(const VecX&, double t) const {
  VecX gt = VecX::Zero(m_eq_);
  for (size_t i = 0; i < model_.buses.size(); ++i) {
    gt(2 * i) = -bus_load_[i]->pd.eval(t).second;
    gt(2 * i + 1) = -bus_load_[i]->qd.eval(t).second;
  }
  return gt;
}

VecX OpfProblem::ineq_time_derivative(const VecX&, double t) const {
  VecX ht = VecX::Zero(m_ineq_);
  for (int m = 0; m < m_ineq_; ++m)
    if (rows_[m].kind == IneqRow::kResAvail)
      ht(m) = -res_pav_[rows_[m].idx]->eval(t).second;
  return ht;
}

VecX OpfProblem::grad_objective_time_derivative(const VecX&, double t) const {
  VecX gt = VecX::Zero(n_);
  for (size_t k = 0; k < model_.res.size(); ++k)
    gt(pr_[k]) = -2.0 * model_.res[k].cp * res_pav_[k]->eval(t).second;
  return gt;
}

VecX OpfProblem::initial_primal(double t) const {
  VecX x = VecX::Zero(n_);
  for (size_t i = 0; i < model_.buses.size(); ++i) {
    if (ev_[i] >= 0) x(ev_[i]) = 1.0;
    if (fv_[i] >= 0) x(fv_[i]) = 0.0;
  }
  for (size_t k = 0; k < model_.gens.size(); ++k)
    x(pg_[k]) = 0.5 * (model_.gens[k].pmin + model_.gens[k].pmax);
  for (size_t k = 0; k < model_.res.size(); ++k)
    x(pr_[k]) = res_pav_[k]->eval(t).first;
  return x;
}

namespace {

int pick_slack(const Subsystem& sub) {
  if (!sub.generators.empty()) {
    int gen_bus = sub.generators.front().bus;
    for (size_t i = 0; i < sub.buses.size(); ++i)
      if (sub.buses[i].id == gen_bus) return static_cast<int>(i);
  }
  return sub.buses.empty() ? -1 : 0;
}

int local_bus(const Subsystem& sub, int bus_id, const std::string& scope) {
  for (size_t i = 0; i < sub.buses.size(); ++i)
    if (sub.buses[i].id == bus_id) return static_cast<int>(i);
  throw ValidationError(scope + ": unknown bus " + std::to_string(bus_id));
}

OpfModel base_model(const Subsystem& sub, const std::string& scope,
                    const std::function<std::string(int)>& key_of) {
  OpfModel m;
  m.name = scope;
  for (const auto& b : sub.buses)
    m.buses.push_back({key_of(b.id), b.vmin, b.vmax});
  for (const auto& br : sub.branches)
    m.branches.push_back({local_bus(sub, br.from, scope), local_bus(sub, br.to, scope),
                          br.g, br.b, br.smax});
  for (const auto& g : sub.generators)
    m.gens.push_back({local_bus(sub, g.bus, scope), g.pmin, g.pmax, g.c2, g.c1, g.c0});
  for (const auto& r : sub.res_units)
    m.res.push_back({local_bus(sub, r.bus, scope), key_of(r.bus), r.s_rated,
                     r.tan_theta, r.cp, r.cq});
  return m;
}

}  // namespace

OpfModel make_ts_model(const Network& net) {
  OpfModel m = base_model(net.ts, "ts", ts_bus_key);
  m.slack_bus = pick_slack(net.ts);
  for (const auto& tie : net.ties)
    m.ties.push_back({local_bus(net.ts, tie.ts_bus, "ts"), -1.0});
  return m;
}

OpfModel make_ts_model_fixed_ties(const Network& net,
                                  const std::vector<std::pair<double, double>>& tie_pq) {
  if (tie_pq.size() != net.ties.size())
    throw DimensionError("fixed tie values must match the number of tie lines");
  OpfModel m = base_model(net.ts, "ts", ts_bus_key);
  m.slack_bus = pick_slack(net.ts);
  for (size_t k = 0; k < net.ties.size(); ++k)
    m.ties.push_back({local_bus(net.ts, net.ties[k].ts_bus, "ts"), -1.0, true,
                      tie_pq[k].first, tie_pq[k].second});
  return m;
}

OpfModel make_ds_model(const Network& net, int ds_id) {
  const DistSystem& d = net.ds_by_id(ds_id);
  std::string scope = "ds" + std::to_string(ds_id);
  OpfModel m = base_model(d, scope, [&](int b) { return ds_bus_key(ds_id, b); });
  int root = local_bus(d, d.root_bus, scope);
  m.buses[root].vlimit = false;  // voltage limit at the interface bus is TS-owned
  m.ties.push_back({root, +1.0});
  return m;
}

OpfModel make_ds_model_pinned_root(const Network& net, int ds_id, double root_e,
                                   double root_f) {
  OpfModel m = make_ds_model(net, ds_id);
  const DistSystem& d = net.ds_by_id(ds_id);
  int root = local_bus(d, d.root_bus, m.name);
  m.buses[root].pinned = true;
  m.buses[root].pin_e = root_e;
  m.buses[root].pin_f = root_f;
  return m;
}

std::unique_ptr<OpfProblem> build_nlp(const Network& net,
                                      std::shared_ptr<const Scenario> scenario,
                                      int slack_bus_local) {
  if (!net.ds.empty())
    throw ValidationError(
        "build_nlp: network has distribution systems; use partition_network");
  OpfModel m = base_model(net.ts, "ts", ts_bus_key);
  m.slack_bus = slack_bus_local;
  return std::make_unique<OpfProblem>(std::move(m), std::move(scenario));
}

}  // namespace gridtrack
