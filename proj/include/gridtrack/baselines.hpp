#pragma once

#include <vector>

#include "gridtrack/opf_problem.hpp"
#include "gridtrack/pdipm.hpp"

namespace gridtrack {

// Fixed boundary conditions for uncoordinated operation: each DS assumes a
// root voltage, the TS assumes a tie withdrawal.
struct BoundaryAssumption {
  struct DsFix {
    int ds_id = 0;
    double root_v = 1.0, root_angle = 0.0;  // magnitude (pu), angle (rad)
    double tie_p = 0.0, tie_q = 0.0;        // assumed TS withdrawal (pu)
  };
  std::vector<DsFix> per_ds;

  // Root at 1.0 pu, angle 0; tie flow equal to the DS's total load at t.
  static BoundaryAssumption nominal(const Network& net, const Scenario& sc,
                                    double t);
};

struct IndependentResult {
  SolveResult ts;
  std::vector<SolveResult> ds;  // in net.ds order
  double objective = 0.0;       // sum of agent objectives
  bool converged = false;       // all agents converged
  // per DS: assumed tie transfer minus the DS-realized root injection
  std::vector<std::pair<double, double>> boundary_mismatch;
};

// TS solves with tie withdrawals fixed; each DS solves with its root voltage
// pinned and its tie injection free.
IndependentResult independent_solve(const Network& net,
                                    std::shared_ptr<const Scenario> sc, double t,
                                    const BoundaryAssumption& assumption,
                                    const PdipmOptions& opt = {});

}  // namespace gridtrack
