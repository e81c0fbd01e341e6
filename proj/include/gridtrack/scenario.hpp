#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridtrack/network.hpp"

namespace gridtrack {

// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson limited
// slopes). Reproduces linear data exactly and never overshoots the knot
// range on monotone segments.
class Profile {
 public:
  Profile() = default;
  static Profile from_knots(std::vector<double> times, std::vector<double> values);
  static Profile constant(double t0, double t1, double value);

  // Returns (value, d_value/dt). Throws if t is outside [t_first, t_last].
  std::pair<double, double> eval(double t) const;

  const std::vector<double>& knot_times() const { return t_; }
  const std::vector<double>& knot_values() const { return v_; }
  double t_first() const { return t_.front(); }
  double t_last() const { return t_.back(); }

 private:
  std::vector<double> t_, v_, slope_;
};

struct NoiseSpec {
  double amplitude = 0.0;
  std::uint64_t seed = 0;
};

// Per-node parameter snapshot with analytic time derivatives. Node and RES
// ordering follows NetworkIndex.
struct ParamSnapshot {
  double t = 0.0;
  Eigen::VectorXd pd, qd, dpd, dqd;  // per merged node
  Eigen::VectorXd pav, dpav;         // per RES unit
};

struct LoadProfilePair {
  Profile pd, qd;
};

class Scenario {
 public:
  Scenario() = default;
  Scenario(double t_start, double t_end) : t0_(t_start), t1_(t_end) {}

  double t_start() const { return t0_; }
  double t_end() const { return t1_; }
  const NoiseSpec& noise() const { return noise_; }

  void set_load(const std::string& key, Profile pd, Profile qd);
  void set_pav(const std::string& key, Profile pav);
  void set_constant_load(const std::string& key, double pd, double qd);
  void set_constant_pav(const std::string& key, double pav);

  bool has_load(const std::string& key) const { return loads_.count(key) > 0; }
  bool has_pav(const std::string& key) const { return pav_.count(key) > 0; }
  const LoadProfilePair& load(const std::string& key) const;
  const Profile& pav(const std::string& key) const;

  // Loads for every node and availabilities for every RES of the network,
  // with analytic time derivatives. Throws if a referenced profile is
  // missing or t is outside the horizon.
  ParamSnapshot sample(const NetworkIndex& idx, double t) const;

  static Scenario load_file(const std::string& path);
  void save_file(const std::string& path) const;

  // Synthetic day shapes. shape in {flat, ramp, noon-peak, cloud-transient}.
  // Per-bus/RES knot values are nominal * shape(t) * (1 + noise*u), u drawn
  // once per knot from a stream seeded by (seed, profile key).
  static Scenario make_synthetic(const Network& net, const std::string& shape,
                                 double noise_amplitude, std::uint64_t seed,
                                 double t_start, double t_end, double knot_dt);

 private:
  double t0_ = 0.0, t1_ = 0.0;
  NoiseSpec noise_;
  std::map<std::string, LoadProfilePair> loads_;
  std::map<std::string, Profile> pav_;
};

}  // namespace gridtrack
