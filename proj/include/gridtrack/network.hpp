#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gridtrack/util.hpp"

namespace gridtrack {

enum class BusKind { kTransmission, kDistributionRoot, kDistributionInternal };
enum class ResKind { kPv, kWt };

struct Bus {
  int id = 0;
  double vmin = 0.9;
  double vmax = 1.1;
};

struct Branch {
  int from = 0;
  int to = 0;
  double g = 0.0;   // series conductance, p.u.
  double b = 0.0;   // series susceptance, p.u.
  double smax = 0.0;
};

struct Generator {
  int bus = 0;
  double pmin = 0.0;
  double pmax = 0.0;
  double c2 = 0.0;  // $/h per p.u.^2
  double c1 = 0.0;
  double c0 = 0.0;
};

struct ResUnit {
  int bus = 0;
  double s_rated = 0.0;
  double tan_theta = 0.0;
  double cp = 0.0;
  double cq = 0.0;
  ResKind kind = ResKind::kPv;
};

struct Subsystem {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<ResUnit> res_units;
};

struct DistSystem : Subsystem {
  int id = 0;
  int root_bus = 0;
};

struct TieLine {
  int ts_bus = 0;
  int ds_id = 0;
};

struct Network {
  double base_mva = 100.0;
  Subsystem ts;
  std::vector<DistSystem> ds;
  std::vector<TieLine> ties;

  const DistSystem& ds_by_id(int id) const;
  const TieLine& tie_for_ds(int ds_id) const;
};

// Scenario/profile key for a bus: "ts:<id>" or "ds<dsid>:<id>".
std::string ts_bus_key(int bus_id);
std::string ds_bus_key(int ds_id, int bus_id);

// Flat indexing over the physically merged network: TS buses in file order,
// then each DS's non-root buses. A DS root is the same electrical node as the
// TS bus its tie connects to.
struct NodeRef {
  std::string key;   // scenario key of the original bus record
  double vmin, vmax;
  BusKind kind;
};

struct MergedBranch {
  int from, to;  // node indices
  double g, b, smax;
};

struct MergedUnit {
  int node;
  int source;  // index into ts/ds unit list, for reference only
};

class NetworkIndex {
 public:
  explicit NetworkIndex(const Network& net);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  int num_generators() const { return static_cast<int>(gen_node_.size()); }
  int num_res() const { return static_cast<int>(res_node_.size()); }

  const std::vector<NodeRef>& nodes() const { return nodes_; }
  const std::vector<MergedBranch>& branches() const { return branches_; }
  const std::vector<int>& gen_nodes() const { return gen_node_; }
  const std::vector<int>& res_nodes() const { return res_node_; }
  const std::vector<std::string>& res_keys() const { return res_keys_; }

  int node_of_ts_bus(int bus_id) const;
  int node_of_ds_bus(int ds_id, int bus_id) const;

 private:
  std::vector<NodeRef> nodes_;
  std::vector<MergedBranch> branches_;
  std::vector<int> gen_node_;
  std::vector<int> res_node_;
  std::vector<std::string> res_keys_;
  std::map<int, int> ts_node_;
  std::map<std::pair<int, int>, int> ds_node_;
};

struct GridVariables {
  Eigen::VectorXd e, f;          // per merged node
  Eigen::VectorXd p_g, q_g;      // per generator
  Eigen::VectorXd p_res, q_res;  // per RES unit

  static GridVariables flat(const NetworkIndex& idx);
};

// Loads a case file (JSON, schema in README) and validates all invariants.
// Throws ParseError for malformed files and ValidationError for invariant
// violations; messages name the offending record.
Network load_case(const std::string& path);

void validate(const Network& net);

// Rectangular-coordinate branch flow seen from terminal i.
std::pair<double, double> branch_flow(double ei, double fi, double ej, double fj,
                                      double g, double b);

struct LoadSnapshot {
  Eigen::VectorXd pd, qd;  // per merged node
};

// Per-node active/reactive balance residuals: [P_0, Q_0, P_1, Q_1, ...].
Eigen::VectorXd power_mismatch(const NetworkIndex& idx, const GridVariables& vars,
                               const LoadSnapshot& loads);

}  // namespace gridtrack
