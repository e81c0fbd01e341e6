#include "gridtrack/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

namespace gridtrack {

using nlohmann::json;

namespace {

int sgn(double x) { return (x > 0) - (x < 0); }

// Fritsch-Carlson limited slopes (three-point rule at the edges).
std::vector<double> pchip_slopes(const std::vector<double>& t,
                                 const std::vector<double>& v) {
  const int n = static_cast<int>(t.size());
  std::vector<double> m(n, 0.0);
  if (n == 1) return m;
  std::vector<double> h(n - 1), d(n - 1);
  for (int i = 0; i < n - 1; ++i) {
    h[i] = t[i + 1] - t[i];
    d[i] = (v[i + 1] - v[i]) / h[i];
  }
  if (n == 2) {
    m[0] = m[1] = d[0];
    return m;
  }
  for (int i = 1; i < n - 1; ++i) {
    if (d[i - 1] * d[i] <= 0.0) {
      m[i] = 0.0;
    } else {
      double w1 = 2.0 * h[i] + h[i - 1];
      double w2 = h[i] + 2.0 * h[i - 1];
      m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
  }
  auto edge = [](double h0, double h1, double d0, double d1) {
    double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (sgn(s) != sgn(d0)) return 0.0;
    if (sgn(d0) != sgn(d1) && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
    return s;
  };
  m[0] = edge(h[0], h[1], d[0], d[1]);
  m[n - 1] = edge(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
  return m;
}

}  // namespace

Profile Profile::from_knots(std::vector<double> times, std::vector<double> values) {
  if (times.empty() || times.size() != values.size())
    throw ValidationError("profile: knot times and values must be nonempty and equal length");
  for (size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw ValidationError("profile: knot times must be strictly increasing");
  Profile p;
  p.t_ = std::move(times);
  p.v_ = std::move(values);
  p.slope_ = pchip_slopes(p.t_, p.v_);
  return p;
}

Profile Profile::constant(double t0, double t1, double value) {
  return from_knots({t0, t1}, {value, value});
}

std::pair<double, double> Profile::eval(double t) const {
  constexpr double kTol = 1e-9;
  if (t < t_.front() - kTol || t > t_.back() + kTol)
    throw ValidationError("profile evaluated outside horizon: t=" + std::to_string(t));
  if (t_.size() == 1) return {v_[0], 0.0};
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  int i = static_cast<int>(it - t_.begin()) - 1;
  i = std::clamp(i, 0, static_cast<int>(t_.size()) - 2);
  double h = t_[i + 1] - t_[i];
  double s = (t - t_[i]) / h;
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  double value = h00 * v_[i] + h * h10 * slope_[i] + h01 * v_[i + 1] + h * h11 * slope_[i + 1];
  double dh00 = 6 * s2 - 6 * s, dh10 = 3 * s2 - 4 * s + 1;
  double dh11 = 3 * s2 - 2 * s;
  double deriv = (dh00 * v_[i] - dh00 * v_[i + 1]) / h + dh10 * slope_[i] + dh11 * slope_[i + 1];
  return {value, deriv};
}

void Scenario::set_load(const std::string& key, Profile pd, Profile qd) {
  loads_[key] = {std::move(pd), std::move(qd)};
}

void Scenario::set_pav(const std::string& key, Profile pav) {
  pav_[key] = std::move(pav);
}

void Scenario::set_constant_load(const std::string& key, double pd, double qd) {
  set_load(key, Profile::constant(t0_, t1_, pd), Profile::constant(t0_, t1_, qd));
}

void Scenario::set_constant_pav(const std::string& key, double pav) {
  set_pav(key, Profile::constant(t0_, t1_, pav));
}

const LoadProfilePair& Scenario::load(const std::string& key) const {
  auto it = loads_.find(key);
  if (it == loads_.end())
    throw ValidationError("scenario: missing load profile for " + key);
  return it->second;
}

const Profile& Scenario::pav(const std::string& key) const {
  auto it = pav_.find(key);
  if (it == pav_.end())
    throw ValidationError("scenario: missing availability profile for " + key);
  return it->second;
}

ParamSnapshot Scenario::sample(const NetworkIndex& idx, double t) const {
  ParamSnapshot s;
  s.t = t;
  int n = idx.num_nodes(), r = idx.num_res();
  s.pd.resize(n);
  s.qd.resize(n);
  s.dpd.resize(n);
  s.dqd.resize(n);
  s.pav.resize(r);
  s.dpav.resize(r);
  for (int i = 0; i < n; ++i) {
    const auto& lp = load(idx.nodes()[i].key);
    std::tie(s.pd(i), s.dpd(i)) = lp.pd.eval(t);
    std::tie(s.qd(i), s.dqd(i)) = lp.qd.eval(t);
  }
  for (int k = 0; k < r; ++k)
    std::tie(s.pav(k), s.dpav(k)) = pav(idx.res_keys()[k]).eval(t);
  return s;
}

namespace {

double day_shape(const std::string& shape, double s, bool is_res) {
  if (shape == "flat") return 1.0;
  if (shape == "ramp") return 0.6 + 0.4 * s;
  double bump = 0.7 + 0.3 * std::sin(M_PI * s);
  if (shape == "noon-peak") return bump;
  if (shape == "cloud-transient") {
    if (!is_res) return bump;
    double z = (s - 0.5) / 0.08;
    return bump * (1.0 - 0.5 * std::exp(-z * z));
  }
  throw ValidationError("unknown scenario shape: " + shape);
}

Profile noisy_profile(const std::string& shape, bool is_res, double nominal,
                      double amp, std::uint64_t stream_seed, double t0, double t1,
                      double dt) {
  SplitMix64 rng(stream_seed);
  // knots always span [t0, t1] exactly so every profile covers the horizon,
  // even when dt exceeds the horizon or does not divide it
  double dt_eff = std::min(dt, t1 - t0);
  std::vector<double> times;
  for (double t = t0; t < t1 - 0.5 * dt_eff; t += dt_eff) times.push_back(t);
  times.push_back(t1);
  std::vector<double> values;
  for (double t : times) {
    double s = (t - t0) / (t1 - t0);
    double base = nominal * day_shape(shape, s, is_res);
    values.push_back(base * (1.0 + amp * rng.symmetric()));
  }
  return Profile::from_knots(std::move(times), std::move(values));
}

}  // namespace

Scenario Scenario::make_synthetic(const Network& net, const std::string& shape,
                                  double noise_amplitude, std::uint64_t seed,
                                  double t_start, double t_end, double knot_dt) {
  if (!(knot_dt > 0.0) || !(t_end > t_start))
    throw ValidationError("make_synthetic: need t_end > t_start and knot_dt > 0");
  day_shape(shape, 0.0, false);  // reject unknown shapes up front
  Scenario sc(t_start, t_end);
  sc.noise_ = {noise_amplitude, seed};

  NetworkIndex idx(net);
  auto gen_buses = [&net]() {
    std::set<std::string> s;
    for (const auto& g : net.ts.generators) s.insert(ts_bus_key(g.bus));
    return s;
  }();

  for (const auto& node : idx.nodes()) {
    double pd0, qd0;
    if (node.kind == BusKind::kTransmission) {
      bool has_gen = gen_buses.count(node.key) > 0;
      pd0 = has_gen ? 0.0 : 0.5;
      qd0 = has_gen ? 0.0 : 0.2;
    } else {
      pd0 = 0.0012;
      qd0 = 0.0007;
    }
    sc.set_load(node.key,
                noisy_profile(shape, false, pd0, noise_amplitude,
                              hash_combine(seed, node.key + "/pd"), t_start, t_end,
                              knot_dt),
                noisy_profile(shape, false, qd0, noise_amplitude,
                              hash_combine(seed, node.key + "/qd"), t_start, t_end,
                              knot_dt));
  }

  // Interface-bus load is carried on the TS side; the DS root key still needs
  // a profile because the DS agent references it.
  for (const auto& d : net.ds)
    sc.set_constant_load(ds_bus_key(d.id, d.root_bus), 0.0, 0.0);

  auto add_res = [&](const ResUnit& r, const std::string& key) {
    sc.set_pav(key, noisy_profile(shape, true, r.s_rated, noise_amplitude,
                                  hash_combine(seed, key + "/pav"), t_start, t_end,
                                  knot_dt));
  };
  for (const auto& r : net.ts.res_units) add_res(r, ts_bus_key(r.bus));
  for (const auto& d : net.ds)
    for (const auto& r : d.res_units) add_res(r, ds_bus_key(d.id, r.bus));
  return sc;
}

Scenario Scenario::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("malformed scenario file " + path + ": " + e.what());
  }
  if (!j.contains("horizon") || !j["horizon"].is_array() || j["horizon"].size() != 2)
    throw ParseError(path + ": missing horizon [t0, t1]");
  double t0 = j["horizon"][0].get<double>();
  double t1 = j["horizon"][1].get<double>();
  double dt = j.value("knot_dt", 0.0);
  Scenario sc(t0, t1);
  if (j.contains("noise"))
    sc.noise_ = {j["noise"].value("amplitude", 0.0),
                 j["noise"].value("seed", std::uint64_t{0})};
  // knot times come from an explicit per-profile array when present, and
  // from a uniform knot_dt grid starting at t0 otherwise
  auto times_for = [&](const json& jp, const char* tkey, size_t count) {
    if (jp.contains(tkey)) return jp[tkey].get<std::vector<double>>();
    if (!(dt > 0.0)) throw ParseError(path + ": knot_dt must be > 0");
    std::vector<double> times(count);
    for (size_t i = 0; i < count; ++i) times[i] = t0 + static_cast<double>(i) * dt;
    return times;
  };
  const json profiles = j.value("profiles", json::object());
  for (const auto& [key, jp] : profiles.items()) {
    if (jp.contains("pd") != jp.contains("qd"))
      throw ParseError(path + ": profile " + key + " must carry both pd and qd");
    if (jp.contains("pd")) {
      auto pd = jp["pd"].get<std::vector<double>>();
      auto qd = jp["qd"].get<std::vector<double>>();
      if (pd.size() != qd.size())
        throw ParseError(path + ": profile " + key + " pd/qd length mismatch");
      sc.set_load(key, Profile::from_knots(times_for(jp, "pd_t", pd.size()), pd),
                  Profile::from_knots(times_for(jp, "qd_t", qd.size()), qd));
    }
    if (jp.contains("pav")) {
      auto pav = jp["pav"].get<std::vector<double>>();
      sc.set_pav(key, Profile::from_knots(times_for(jp, "pav_t", pav.size()), pav));
    }
  }
  return sc;
}

void Scenario::save_file(const std::string& path) const {
  json j;
  j["horizon"] = {t0_, t1_};
  j["noise"] = {{"amplitude", noise_.amplitude}, {"seed", noise_.seed}};
  json profiles = json::object();
  for (const auto& [key, lp] : loads_) {
    profiles[key]["pd_t"] = lp.pd.knot_times();
    profiles[key]["pd"] = lp.pd.knot_values();
    profiles[key]["qd_t"] = lp.qd.knot_times();
    profiles[key]["qd"] = lp.qd.knot_values();
  }
  for (const auto& [key, p] : pav_) {
    profiles[key]["pav_t"] = p.knot_times();
    profiles[key]["pav"] = p.knot_values();
  }
  j["profiles"] = profiles;
  std::ofstream out(path);
  if (!out) throw Error("cannot write scenario file: " + path);
  out << j.dump(1) << "\n";
}

}  // namespace gridtrack
