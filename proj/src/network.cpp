#include "gridtrack/network.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>

#include <json.hpp>

namespace gridtrack {

using nlohmann::json;

LogLevel log_level() {
  static LogLevel lvl = [] {
    const char* env = std::getenv("GRIDTRACK_LOG");
    if (!env) return LogLevel::kError;
    std::string s(env);
    if (s == "debug") return LogLevel::kDebug;
    if (s == "info") return LogLevel::kInfo;
    return LogLevel::kError;
  }();
  return lvl;
}

std::string ts_bus_key(int bus_id) { return "ts:" + std::to_string(bus_id); }
std::string ds_bus_key(int ds_id, int bus_id) {
  return "ds" + std::to_string(ds_id) + ":" + std::to_string(bus_id);
}

const DistSystem& Network::ds_by_id(int id) const {
  for (const auto& d : ds)
    if (d.id == id) return d;
  throw ValidationError("no distribution system with id " + std::to_string(id));
}

const TieLine& Network::tie_for_ds(int ds_id) const {
  for (const auto& t : ties)
    if (t.ds_id == ds_id) return t;
  throw ValidationError("no tie line for ds " + std::to_string(ds_id));
}

namespace {

void check_subsystem(const Subsystem& sub, const std::string& scope) {
  std::set<int> ids;
  for (const auto& b : sub.buses) {
    if (!(b.vmin > 0.0 && b.vmin < b.vmax))
      throw ValidationError(scope + " bus " + std::to_string(b.id) +
                            ": requires 0 < vmin < vmax");
    if (!ids.insert(b.id).second)
      throw ValidationError(scope + " bus " + std::to_string(b.id) + ": duplicate id");
  }
  auto has_bus = [&](int id) { return ids.count(id) > 0; };
  for (const auto& br : sub.branches) {
    std::string name = scope + " branch " + std::to_string(br.from) + "-" +
                       std::to_string(br.to);
    if (br.from == br.to) throw ValidationError(name + ": from == to");
    if (!has_bus(br.from) || !has_bus(br.to))
      throw ValidationError(name + ": endpoint references nonexistent bus");
    if (!(br.smax > 0.0)) throw ValidationError(name + ": smax must be > 0");
    if (br.g < 0.0) throw ValidationError(name + ": g must be >= 0");
  }
  for (const auto& g : sub.generators) {
    std::string name = scope + " generator at bus " + std::to_string(g.bus);
    if (!has_bus(g.bus)) throw ValidationError(name + ": nonexistent bus");
    if (g.pmin > g.pmax) throw ValidationError(name + ": pmin > pmax");
    if (g.c2 < 0.0) throw ValidationError(name + ": c2 must be >= 0");
  }
  for (const auto& r : sub.res_units) {
    std::string name = scope + " res at bus " + std::to_string(r.bus);
    if (!has_bus(r.bus)) throw ValidationError(name + ": nonexistent bus");
    if (!(r.s_rated > 0.0)) throw ValidationError(name + ": s_rated must be > 0");
    if (r.tan_theta < 0.0) throw ValidationError(name + ": tan_theta must be >= 0");
    if (r.cp < 0.0 || r.cq < 0.0) throw ValidationError(name + ": cp, cq must be >= 0");
  }
  // Connectivity (union-find over bus ids).
  if (!sub.buses.empty()) {
    std::map<int, int> parent;
    for (const auto& b : sub.buses) parent[b.id] = b.id;
    std::function<int(int)> find = [&](int x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& br : sub.branches) parent[find(br.from)] = find(br.to);
    int root = find(sub.buses.front().id);
    for (const auto& b : sub.buses)
      if (find(b.id) != root)
        throw ValidationError(scope + ": not connected (bus " + std::to_string(b.id) +
                              " unreachable)");
  }
}

}  // namespace

void validate(const Network& net) {
  check_subsystem(net.ts, "ts");
  std::set<int> ts_ids, ds_ids;
  for (const auto& b : net.ts.buses) ts_ids.insert(b.id);
  for (const auto& d : net.ds) {
    std::string scope = "ds" + std::to_string(d.id);
    if (!ds_ids.insert(d.id).second)
      throw ValidationError(scope + ": duplicate distribution system id");
    check_subsystem(d, scope);
    bool root_found = std::any_of(d.buses.begin(), d.buses.end(),
                                  [&](const Bus& b) { return b.id == d.root_bus; });
    if (!root_found)
      throw ValidationError(scope + ": root bus " + std::to_string(d.root_bus) +
                            " not in bus list");
  }
  std::set<int> tied;
  for (const auto& t : net.ties) {
    std::string name = "tie (ts_bus " + std::to_string(t.ts_bus) + ", ds " +
                       std::to_string(t.ds_id) + ")";
    if (!ts_ids.count(t.ts_bus))
      throw ValidationError(name + ": nonexistent TS bus");
    if (!ds_ids.count(t.ds_id))
      throw ValidationError(name + ": nonexistent distribution system");
    if (!tied.insert(t.ds_id).second)
      throw ValidationError(name + ": multiple ties to one distribution system");
  }
  for (const auto& d : net.ds)
    if (!tied.count(d.id))
      throw ValidationError("ds" + std::to_string(d.id) + ": has no tie line");
}

namespace {

double num_field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_number())
    throw ParseError(ctx + ": missing or non-numeric field '" + key + "'");
  return j[key].get<double>();
}

int int_field(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key) || !j[key].is_number_integer())
    throw ParseError(ctx + ": missing or non-integer field '" + key + "'");
  return j[key].get<int>();
}

Subsystem parse_subsystem(const json& j, const std::string& scope) {
  Subsystem sub;
  for (const auto& jb : j.value("buses", json::array())) {
    std::string ctx = scope + " bus";
    sub.buses.push_back({int_field(jb, "id", ctx), num_field(jb, "vmin", ctx),
                         num_field(jb, "vmax", ctx)});
  }
  for (const auto& jb : j.value("branches", json::array())) {
    std::string ctx = scope + " branch";
    sub.branches.push_back({int_field(jb, "from", ctx), int_field(jb, "to", ctx),
                            num_field(jb, "g", ctx), num_field(jb, "b", ctx),
                            num_field(jb, "smax", ctx)});
  }
  for (const auto& jg : j.value("generators", json::array())) {
    std::string ctx = scope + " generator";
    sub.generators.push_back({int_field(jg, "bus", ctx), num_field(jg, "pmin", ctx),
                              num_field(jg, "pmax", ctx), num_field(jg, "c2", ctx),
                              num_field(jg, "c1", ctx), num_field(jg, "c0", ctx)});
  }
  for (const auto& jr : j.value("res", json::array())) {
    std::string ctx = scope + " res";
    ResUnit r{int_field(jr, "bus", ctx),       num_field(jr, "s_rated", ctx),
              num_field(jr, "tan_theta", ctx), num_field(jr, "cp", ctx),
              num_field(jr, "cq", ctx),        ResKind::kPv};
    std::string kind = jr.value("kind", "pv");
    if (kind == "wt")
      r.kind = ResKind::kWt;
    else if (kind != "pv")
      throw ParseError(ctx + ": unknown kind '" + kind + "'");
    sub.res_units.push_back(r);
  }
  return sub;
}

}  // namespace

Network load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("malformed case file " + path + ": " + e.what());
  }
  Network net;
  net.base_mva = j.value("base_mva", 100.0);
  if (!j.contains("ts")) throw ParseError(path + ": missing 'ts' section");
  net.ts = parse_subsystem(j["ts"], "ts");
  for (const auto& jd : j.value("ds", json::array())) {
    DistSystem d;
    d.id = int_field(jd, "id", "ds");
    std::string scope = "ds" + std::to_string(d.id);
    static_cast<Subsystem&>(d) = parse_subsystem(jd, scope);
    d.root_bus = int_field(jd, "root_bus", scope);
    net.ds.push_back(std::move(d));
  }
  for (const auto& jt : j.value("ties", json::array())) {
    net.ties.push_back({int_field(jt, "ts_bus", "tie"), int_field(jt, "ds_id", "tie")});
  }
  validate(net);
  return net;
}

NetworkIndex::NetworkIndex(const Network& net) {
  for (const auto& b : net.ts.buses) {
    ts_node_[b.id] = static_cast<int>(nodes_.size());
    nodes_.push_back({ts_bus_key(b.id), b.vmin, b.vmax, BusKind::kTransmission});
  }
  for (const auto& g : net.ts.generators)
    gen_node_.push_back(node_of_ts_bus(g.bus));
  for (const auto& r : net.ts.res_units) {
    res_node_.push_back(node_of_ts_bus(r.bus));
    res_keys_.push_back(ts_bus_key(r.bus));
  }
  for (const auto& d : net.ds) {
    int root_node = node_of_ts_bus(net.tie_for_ds(d.id).ts_bus);
    for (const auto& b : d.buses) {
      if (b.id == d.root_bus) {
        ds_node_[{d.id, b.id}] = root_node;
      } else {
        ds_node_[{d.id, b.id}] = static_cast<int>(nodes_.size());
        nodes_.push_back(
            {ds_bus_key(d.id, b.id), b.vmin, b.vmax, BusKind::kDistributionInternal});
      }
    }
    for (const auto& br : d.branches)
      branches_.push_back({node_of_ds_bus(d.id, br.from), node_of_ds_bus(d.id, br.to),
                           br.g, br.b, br.smax});
    for (const auto& g : d.generators)
      gen_node_.push_back(node_of_ds_bus(d.id, g.bus));
    for (const auto& r : d.res_units) {
      res_node_.push_back(node_of_ds_bus(d.id, r.bus));
      res_keys_.push_back(ds_bus_key(d.id, r.bus));
    }
  }
  for (const auto& br : net.ts.branches)
    branches_.push_back(
        {node_of_ts_bus(br.from), node_of_ts_bus(br.to), br.g, br.b, br.smax});
}

int NetworkIndex::node_of_ts_bus(int bus_id) const {
  auto it = ts_node_.find(bus_id);
  if (it == ts_node_.end())
    throw ValidationError("unknown TS bus " + std::to_string(bus_id));
  return it->second;
}

int NetworkIndex::node_of_ds_bus(int ds_id, int bus_id) const {
  auto it = ds_node_.find({ds_id, bus_id});
  if (it == ds_node_.end())
    throw ValidationError("unknown bus " + std::to_string(bus_id) + " in ds" +
                          std::to_string(ds_id));
  return it->second;
}

GridVariables GridVariables::flat(const NetworkIndex& idx) {
  GridVariables v;
  v.e = Eigen::VectorXd::Ones(idx.num_nodes());
  v.f = Eigen::VectorXd::Zero(idx.num_nodes());
  v.p_g = Eigen::VectorXd::Zero(idx.num_generators());
  v.q_g = Eigen::VectorXd::Zero(idx.num_generators());
  v.p_res = Eigen::VectorXd::Zero(idx.num_res());
  v.q_res = Eigen::VectorXd::Zero(idx.num_res());
  return v;
}

std::pair<double, double> branch_flow(double ei, double fi, double ej, double fj,
                                      double g, double b) {
  double p = g * (ei * ei + fi * fi) - g * (ei * ej + fi * fj) + b * (ei * fj - ej * fi);
  double q = -b * (ei * ei + fi * fi) + b * (ei * ej + fi * fj) + g * (ei * fj - ej * fi);
  return {p, q};
}

Eigen::VectorXd power_mismatch(const NetworkIndex& idx, const GridVariables& vars,
                               const LoadSnapshot& loads) {
  int n = idx.num_nodes();
  if (vars.e.size() != n || vars.f.size() != n || loads.pd.size() != n ||
      loads.qd.size() != n)
    throw DimensionError("power_mismatch: state/load dimensions do not match network");
  Eigen::VectorXd res(2 * n);
  for (int i = 0; i < n; ++i) {
    res(2 * i) = -loads.pd(i);
    res(2 * i + 1) = -loads.qd(i);
  }
  for (int k = 0; k < idx.num_generators(); ++k) {
    int i = idx.gen_nodes()[k];
    res(2 * i) += vars.p_g(k);
    res(2 * i + 1) += vars.q_g(k);
  }
  for (int k = 0; k < idx.num_res(); ++k) {
    int i = idx.res_nodes()[k];
    res(2 * i) += vars.p_res(k);
    res(2 * i + 1) += vars.q_res(k);
  }
  for (const auto& br : idx.branches()) {
    auto [pij, qij] = branch_flow(vars.e(br.from), vars.f(br.from), vars.e(br.to),
                                  vars.f(br.to), br.g, br.b);
    auto [pji, qji] = branch_flow(vars.e(br.to), vars.f(br.to), vars.e(br.from),
                                  vars.f(br.from), br.g, br.b);
    res(2 * br.from) -= pij;
    res(2 * br.from + 1) -= qij;
    res(2 * br.to) -= pji;
    res(2 * br.to + 1) -= qji;
  }
  return res;
}

}  // namespace gridtrack
