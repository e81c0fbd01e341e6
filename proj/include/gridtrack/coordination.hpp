#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "gridtrack/opf_problem.hpp"
#include "gridtrack/tracker.hpp"

namespace gridtrack {

// Condensed view of one DS Newton system as seen from its four boundary
// variables: phi(v) = 1/2 v' j2 v + j1' v + j0.
struct QuadraticSurrogate {
  int ds_id = 0;
  Eigen::MatrixXd j2;
  VecX j1;
  double j0 = 0.0;
};

struct SurrogateUp {
  int ds_id = 0;
  std::uint64_t sample_index = 0;
  QuadraticSurrogate surrogate;
};

struct IncrementDown {
  int ds_id = 0;
  std::uint64_t sample_index = 0;
  VecX dxb;
};

// Binary codec: u8 version, u8 tag, u32 ds_id, u64 sample_index, u32 n_b,
// then little-endian f64 payload (j2 lower triangle row-major, j1, j0 for
// tag 1; dxb for tag 2).
inline constexpr std::uint8_t kCodecVersion = 1;
inline constexpr std::uint8_t kTagSurrogateUp = 1;
inline constexpr std::uint8_t kTagIncrementDown = 2;

using Bytes = std::vector<std::uint8_t>;

Bytes encode(const SurrogateUp& msg);
Bytes encode(const IncrementDown& msg);
std::uint8_t message_tag(const Bytes& buf);
SurrogateUp decode_surrogate_up(const Bytes& buf);
IncrementDown decode_increment_down(const Bytes& buf);

// One agent's slice of the composite problem: its own NLP plus the map from
// its local variables to global positions. Equality/inequality rows of the
// composite are the agents' rows concatenated at the stored offsets.
struct AgentMap {
  int ds_id = -1;  // -1 for the TS agent
  std::shared_ptr<OpfProblem> problem;
  std::vector<int> var_map;
  int eq_offset = 0, ineq_offset = 0;
};

// Coupled transmission-distribution NLP assembled by scatter-add over the
// per-agent problems. Boundary variables (interface-bus voltage components
// and tie-line transfer, four per DS) are owned by the TS agent; each DS
// maps its root-voltage and tie variables onto them.
class CompositeNlp : public NlpProblem {
 public:
  CompositeNlp(const Network& net, std::shared_ptr<const Scenario> scenario);

  const AgentMap& ts_agent() const { return agents_[0]; }
  const std::vector<AgentMap>& agents() const { return agents_; }
  int num_ds() const { return static_cast<int>(agents_.size()) - 1; }
  // Global positions of DS k's boundary variables {e_b, f_b, p_tie, q_tie}.
  const std::array<int, 4>& boundary(int k) const { return boundary_[k]; }
  // The same four variables as positions in the TS agent's local problem.
  const std::array<int, 4>& ts_boundary(int k) const { return ts_boundary_[k]; }

  // Slice of a composite primal-dual state seen by agent a (0 = TS).
  PrimalDualState agent_state(const PrimalDualState& global, int a) const;
  // Scatter-add of per-agent increments into a composite increment
  // (boundary blocks are written by the TS agent).
  Increment merge_increments(const std::vector<Increment>& per_agent) const;

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
  VecX gather(const VecX& x, int a) const;

  std::vector<AgentMap> agents_;
  std::vector<std::array<int, 4>> boundary_, ts_boundary_;
  int n_ = 0, m_eq_ = 0, m_ineq_ = 0;
  VecX lb_, ub_;
};

std::shared_ptr<CompositeNlp> partition_network(const Network& net,
                                                std::shared_ptr<const Scenario> sc);

// Distribution-side agent: condenses its Newton system into a quadratic
// surrogate over the boundary increment, and recovers its full increment
// once the boundary increment comes back. The bordered factorization is
// cached between condense and recover within one sample.
class DsAgent {
 public:
  DsAgent(int ds_id, std::shared_ptr<OpfProblem> problem,
          std::array<int, 4> boundary_vars);

  int ds_id() const { return ds_id_; }
  const OpfProblem& problem() const { return *problem_; }
  PrimalDualState& state() { return state_; }
  const PrimalDualState& state() const { return state_; }

  Bytes condense(double t, double alpha, bool prediction,
                 std::uint64_t sample_index);
  Increment recover(const Bytes& down_msg);

 private:
  int ds_id_;
  std::shared_ptr<OpfProblem> problem_;
  std::array<int, 4> boundary_;
  std::vector<int> interior_;  // non-boundary local variables, ascending
  PrimalDualState state_;
  BorderedSolver ksolver_;
  // per-sample cache
  bool cached_ = false, consumed_ = true;
  std::uint64_t cache_sample_ = 0;
  CondensedSystem cond_;
  Eigen::MatrixXd big_s_;  // K^{-1} C, (n_I + m_eq) x 4
  VecX s0_;                // K^{-1} r0
};

// Transmission-side agent: folds the DS surrogates into its own bordered
// system (ascending ds_id), solves once, and emits the per-DS boundary
// increments.
class TsAgent {
 public:
  TsAgent(std::shared_ptr<OpfProblem> problem,
          std::vector<std::array<int, 4>> boundaries, std::vector<int> ds_ids);

  const OpfProblem& problem() const { return *problem_; }
  PrimalDualState& state() { return state_; }
  const PrimalDualState& state() const { return state_; }

  // Returns the TS increment and one IncrementDown message per DS.
  std::pair<Increment, std::vector<Bytes>> accumulate_solve(
      const std::vector<Bytes>& up_msgs, double t, double alpha, bool prediction,
      std::uint64_t sample_index);

 private:
  std::shared_ptr<OpfProblem> problem_;
  std::vector<std::array<int, 4>> boundaries_;
  std::vector<int> ds_ids_;
  PrimalDualState state_;
  BorderedSolver solver_;
};

enum class StepMode { kPerAgent, kGlobalMin };

// One full coordination round (condense -> accumulate -> recover) without
// stepping: per-agent increments, the merged composite increment, and the
// number of codec messages exchanged. Used by tests and verify_equivalence.
struct RoundResult {
  std::vector<Increment> per_agent;  // TS first, then DSs in net order
  Increment merged;
  long msgs = 0;
};
RoundResult decentralized_increments(const CompositeNlp& comp,
                                     const PrimalDualState& global, double t,
                                     double alpha, bool prediction,
                                     std::uint64_t sample_index);

// Online decentralized tracker holding one TS agent and one agent per DS.
class DecentralizedTracker {
 public:
  DecentralizedTracker(const Network& net, std::shared_ptr<const Scenario> sc,
                       TrackerConfig cfg, StepMode mode = StepMode::kPerAgent);

  // Converged solve of the composite problem at t, scattered to the agents.
  void burn_in(double t);

  struct RoundStats {
    long msgs = 0;
    double alpha_p = 1.0, alpha_d = 1.0;  // TS step lengths (pre-tau scaling)
  };
  // One online round advancing every agent from t to t + tau.
  RoundStats step(double t);

  double objective(double t) const;  // sum over agents
  double kkt_error(double t) const;  // max over agents
  bool interior() const;
  PrimalDualState global_state() const;  // boundary taken from the TS agent
  const CompositeNlp& composite() const { return *comp_; }
  long total_msgs() const { return total_msgs_; }
  long rounds() const { return rounds_; }
  std::uint64_t sample_index() const { return sample_index_; }

 private:
  std::shared_ptr<CompositeNlp> comp_;
  TrackerConfig cfg_;
  StepMode mode_;
  TsAgent ts_;
  std::vector<DsAgent> ds_;
  std::uint64_t sample_index_ = 0;
  long total_msgs_ = 0, rounds_ = 0;
};

// Full decentralized run: burn-in at t_start, one round per sample.
Trajectory run_decentralized(const Network& net, std::shared_ptr<const Scenario> sc,
                             double t_start, double t_end, const TrackerConfig& cfg,
                             StepMode mode = StepMode::kPerAgent);

// Compares one decentralized round against a dense solve of the full
// six-block Newton system on a seeded random interior state.
struct EquivalenceReport {
  bool pass = false;
  double max_rel_dev = 0.0;
  std::array<double, 6> block_dev{};  // dx, dy, dw, dz, du, dl
  int num_vars = 0;
};
EquivalenceReport verify_equivalence(const Network& net,
                                     std::shared_ptr<const Scenario> sc, double t,
                                     std::uint64_t seed);

// Dense reference solve of the full six-block Newton system (small problems
// only); the oracle against which condensation and coordination are checked.
Increment dense_full_increment(const NlpProblem& p, const PrimalDualState& s,
                               double t, double alpha, bool prediction);

// Seeded strictly interior state around the problem's initial point.
PrimalDualState random_interior_state(const NlpProblem& p, double t,
                                      std::uint64_t seed);

}  // namespace gridtrack
