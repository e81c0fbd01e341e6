#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace gridtrack {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct SolverError : Error {
  using Error::Error;
};
struct ProtocolError : Error {
  using Error::Error;
};

enum class LogLevel { kError = 0, kInfo = 1, kDebug = 2 };

// Level comes from GRIDTRACK_LOG={error|info|debug}, read once.
LogLevel log_level();

template <typename... Args>
void log(LogLevel lvl, const char* fmt, Args... args) {
  if (lvl > log_level()) return;
  std::fprintf(stderr, "[gridtrack] ");
  std::fprintf(stderr, fmt, args...);
  std::fprintf(stderr, "\n");
}

inline void log_info(const std::string& msg) { log(LogLevel::kInfo, "%s", msg.c_str()); }
inline void log_debug(const std::string& msg) { log(LogLevel::kDebug, "%s", msg.c_str()); }

// Deterministic 64-bit generator (splitmix64). Used instead of <random>
// distributions so that seeded outputs are identical across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [-1, 1].
  double symmetric() { return 2.0 * uniform() - 1.0; }

  // Uniform in [lo, hi).
  double range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

// FNV-1a, used to derive per-profile noise streams from (seed, key).
inline std::uint64_t hash_combine(std::uint64_t seed, const std::string& key) {
  std::uint64_t h = 1469598103934665603ull ^ seed;
  for (char c : key) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace gridtrack
