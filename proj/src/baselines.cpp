#include "gridtrack/baselines.hpp"

#include <cmath>

namespace gridtrack {

BoundaryAssumption BoundaryAssumption::nominal(const Network& net,
                                               const Scenario& sc, double t) {
  BoundaryAssumption a;
  for (const auto& d : net.ds) {
    BoundaryAssumption::DsFix fix;
    fix.ds_id = d.id;
    for (const auto& bus : d.buses) {
      std::string key = ds_bus_key(d.id, bus.id);
      if (!sc.has_load(key)) continue;
      const auto& lp = sc.load(key);
      fix.tie_p += lp.pd.eval(t).first;
      fix.tie_q += lp.qd.eval(t).first;
    }
    a.per_ds.push_back(fix);
  }
  return a;
}

IndependentResult independent_solve(const Network& net,
                                    std::shared_ptr<const Scenario> sc, double t,
                                    const BoundaryAssumption& assumption,
                                    const PdipmOptions& opt) {
  if (assumption.per_ds.size() != net.ds.size())
    throw ValidationError("boundary assumption must cover every ds");
  std::vector<std::pair<double, double>> tie_pq(net.ties.size(), {0.0, 0.0});
  for (const auto& fix : assumption.per_ds) {
    const TieLine& tie = net.tie_for_ds(fix.ds_id);
    for (const auto& bus : net.ts.buses)
      if (bus.id == tie.ts_bus &&
          (fix.root_v < bus.vmin || fix.root_v > bus.vmax))
        throw ValidationError("assumed root voltage outside interface bus limits");
    for (size_t k = 0; k < net.ties.size(); ++k)
      if (net.ties[k].ds_id == fix.ds_id) tie_pq[k] = {fix.tie_p, fix.tie_q};
  }

  IndependentResult out;
  OpfProblem ts(make_ts_model_fixed_ties(net, tie_pq), sc);
  out.ts = solve_converged(ts, t, opt);
  out.converged = out.ts.converged;
  out.objective = ts.objective(out.ts.state.x, t);

  for (const auto& fix : assumption.per_ds) {
    double e = fix.root_v * std::cos(fix.root_angle);
    double f = fix.root_v * std::sin(fix.root_angle);
    OpfProblem ds(make_ds_model_pinned_root(net, fix.ds_id, e, f), sc);
    SolveResult res = solve_converged(ds, t, opt);
    out.converged = out.converged && res.converged;
    out.objective += ds.objective(res.state.x, t);
    double realized_p = res.state.x(ds.var_tie_p(0));
    double realized_q = res.state.x(ds.var_tie_q(0));
    out.boundary_mismatch.emplace_back(fix.tie_p - realized_p,
                                       fix.tie_q - realized_q);
    out.ds.push_back(std::move(res));
  }
  return out;
}

}  // namespace gridtrack
