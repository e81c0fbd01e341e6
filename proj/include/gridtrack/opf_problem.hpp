#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gridtrack/network.hpp"
#include "gridtrack/nlp.hpp"
#include "gridtrack/scenario.hpp"

namespace gridtrack {

// Agent-level description of one OPF problem (a TS or a single DS). Buses,
// branches and units use local indices; `key` ties a bus to its scenario
// profiles. A pinned bus keeps its voltage constant (used by the independent
// baseline); a fixed tie keeps its transfer constant.
struct OpfBus {
  std::string key;
  double vmin = 0.9, vmax = 1.1;
  bool vlimit = true;
  bool pinned = false;
  double pin_e = 1.0, pin_f = 0.0;
};

struct OpfBranch {
  int from = 0, to = 0;
  double g = 0.0, b = 0.0, smax = 0.0;
};

struct OpfGen {
  int bus = 0;
  double pmin = 0.0, pmax = 0.0, c2 = 0.0, c1 = 0.0, c0 = 0.0;
};

struct OpfRes {
  int bus = 0;
  std::string key;
  double s_rated = 0.0, tan_theta = 0.0, cp = 0.0, cq = 0.0;
};

struct OpfTie {
  int bus = 0;
  double sign = 1.0;  // +1 injection, -1 withdrawal
  bool fixed = false;
  double fixed_p = 0.0, fixed_q = 0.0;
};

struct OpfModel {
  std::string name;
  std::vector<OpfBus> buses;
  std::vector<OpfBranch> branches;
  std::vector<OpfGen> gens;
  std::vector<OpfRes> res;
  std::vector<OpfTie> ties;
  int slack_bus = -1;  // local index, -1 for none; adds an f = 0 equality row
};

// One-sided rows get this artificial loose opposite bound.
inline constexpr double kLooseBound = 1e6;

class OpfProblem : public NlpProblem {
 public:
  OpfProblem(OpfModel model, std::shared_ptr<const Scenario> scenario);

  const OpfModel& model() const { return model_; }
  const Scenario& scenario() const { return *scen_; }

  // Local variable positions (-1 when the quantity is not a variable).
  int var_e(int bus) const { return ev_[bus]; }
  int var_f(int bus) const { return fv_[bus]; }
  int var_gen_p(int k) const { return pg_[k]; }
  int var_gen_q(int k) const { return qg_[k]; }
  int var_res_p(int k) const { return pr_[k]; }
  int var_res_q(int k) const { return qr_[k]; }
  int var_tie_p(int k) const { return pt_[k]; }
  int var_tie_q(int k) const { return qt_[k]; }

  int num_vars() const override { return n_; }
  int num_eq() const override { return m_eq_; }
  int num_ineq() const override { return m_ineq_; }
  const VecX& ineq_lower() const override { return lb_; }
  const VecX& ineq_upper() const override { return ub_; }

  double objective(const VecX& x, double t) const override;
  VecX grad_objective(const VecX& x, double t) const override;
  SpMat hess_objective(const VecX& x, double t) const override;
  VecX eq_constraints(const VecX& x, double t) const override;
  SpMat eq_jacobian(const VecX& x, double t) const override;
  SpMat eq_hessian_sum(const VecX& x, double t, const VecX& y) const override;
  VecX ineq_constraints(const VecX& x, double t) const override;
  SpMat ineq_jacobian(const VecX& x, double t) const override;
  SpMat ineq_hessian_sum(const VecX& x, double t, const VecX& s) const override;
  VecX eq_time_derivative(const VecX& x, double t) const override;
  VecX ineq_time_derivative(const VecX& x, double t) const override;
  VecX grad_objective_time_derivative(const VecX& x, double t) const override;
  VecX initial_primal(double t) const override;

 private:
  struct IneqRow {
    enum Kind { kGenP, kResAvail, kResPfUp, kResPfLo, kResApparent, kVolt, kLine } kind;
    int idx;  // gen/res/bus/branch index
  };

  double bus_e(const VecX& x, int i) const {
    return ev_[i] >= 0 ? x(ev_[i]) : model_.buses[i].pin_e;
  }
  double bus_f(const VecX& x, int i) const {
    return fv_[i] >= 0 ? x(fv_[i]) : model_.buses[i].pin_f;
  }

  OpfModel model_;
  std::shared_ptr<const Scenario> scen_;
  std::vector<const LoadProfilePair*> bus_load_;
  std::vector<const Profile*> res_pav_;
  std::vector<int> ev_, fv_, pg_, qg_, pr_, qr_, pt_, qt_;
  std::vector<IneqRow> rows_;
  int n_ = 0, m_eq_ = 0, m_ineq_ = 0;
  VecX lb_, ub_;
};

// Model builders used by build_nlp, the coordination partition, and the
// independent baseline.
OpfModel make_ts_model(const Network& net);
OpfModel make_ts_model_fixed_ties(const Network& net,
                                  const std::vector<std::pair<double, double>>& tie_pq);
OpfModel make_ds_model(const Network& net, int ds_id);
OpfModel make_ds_model_pinned_root(const Network& net, int ds_id, double root_e,
                                   double root_f);

// NLP for a network without distribution systems. Coupled networks are
// assembled through partition_network / CompositeNlp (coordination.hpp).
std::unique_ptr<OpfProblem> build_nlp(const Network& net,
                                      std::shared_ptr<const Scenario> scenario,
                                      int slack_bus_local = -1);

}  // namespace gridtrack
