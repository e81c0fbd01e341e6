#pragma once

#include <Eigen/SparseLU>

#include "gridtrack/nlp.hpp"

namespace gridtrack {

struct PdipmOptions {
  double gamma = 0.9995;   // fraction-to-boundary
  double sigma = 0.1;      // centering parameter
  double eps_kkt = 1e-6;   // stationarity / feasibility tolerance
  double eps_gap = 1e-6;   // complementarity gap tolerance
  double mu0 = 1.0;        // initial barrier
  int max_iter = 100;
  double slack_floor = 0.1;  // minimum initial slack
};

// Newton increment over the full primal-dual point.
struct Increment {
  VecX dx, dy, dw, dz, du, dl;
};

struct StepLengths {
  double alpha_p = 1.0, alpha_d = 1.0;
};

// Symmetric bordered system obtained by eliminating the slack and bound
// multiplier blocks:  [H Jg'; Jg 0] [dx; dy] = [rx; ry].
struct ReducedSystem {
  SpMat hess;  // condensed Hessian, n x n
  SpMat jac_eq;
  VecX rx, ry;
};

// LU factorization of the bordered matrix with a cached symbolic analysis
// (the sparsity pattern is constant for a fixed problem topology). A
// numerically singular factorization is retried once with +reg on the
// Hessian diagonal and -reg on the equality block diagonal.
class BorderedSolver {
 public:
  explicit BorderedSolver(double regularization = 1e-8)
      : reg_(regularization), lu_(std::make_unique<Eigen::SparseLU<SpMat>>()) {}

  void factorize(const SpMat& hess, const SpMat& jac_eq);
  // Returns (dx, dy). factorize must have been called.
  std::pair<VecX, VecX> solve(const VecX& rx, const VecX& ry) const;

 private:
  double reg_;
  std::unique_ptr<Eigen::SparseLU<SpMat>> lu_;
  int n_ = 0, m_ = 0;
  long pattern_nnz_ = -1;
  bool ready_ = false;
};

// Reduced system plus the pieces needed to recover the eliminated slack and
// multiplier blocks from (dx, dy).
struct CondensedSystem {
  ReducedSystem sys;
  SpMat jac_ineq;
  VecX rw, rz, ru, rl;
};

// Right-hand sides use r_* = alpha * L_* + L_*t; the time-derivative blocks
// are included only when `prediction` is true.
CondensedSystem condense_system(const NlpProblem& p, const PrimalDualState& s,
                                double t, double alpha, bool prediction);
ReducedSystem assemble_reduced(const NlpProblem& p, const PrimalDualState& s,
                               double t, double alpha, bool prediction);

// Back-substitution for (du, dl, dw, dz) given the reduced solution.
Increment recover_blocks(const CondensedSystem& c, const PrimalDualState& s,
                         VecX dx, VecX dy);

// Assembles, factorizes and solves the reduced system, then recovers the
// eliminated slack and multiplier blocks.
Increment compute_increment(const NlpProblem& p, const PrimalDualState& s, double t,
                            double alpha, bool prediction, BorderedSolver& solver);

// Largest fraction-to-boundary steps keeping u, l, z > 0 and w < 0.
StepLengths step_lengths(const PrimalDualState& s, const Increment& inc, double gamma);

// x, u, l move by alpha_p; y, w, z by alpha_d.
void apply_step(PrimalDualState& s, const Increment& inc, const StepLengths& sl);

// sigma * gap / (2 * num_ineq); zero when there are no inequalities.
double barrier_update(const PrimalDualState& s, double sigma);

// Strictly interior start: x from the problem, y = 0, slacks floored,
// z = mu0 / l, w = -mu0 / u.
PrimalDualState interior_init(const NlpProblem& p, double t,
                              const PdipmOptions& opt = {});

struct SolveResult {
  PrimalDualState state;
  int iterations = 0;
  bool converged = false;
};

// Full interior-point solve of the NLP frozen at time t.
SolveResult solve_converged(const NlpProblem& p, double t,
                            const PdipmOptions& opt = {});

}  // namespace gridtrack
