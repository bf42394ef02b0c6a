#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace npc {

/// Deterministic random stream. Uniform and normal variates are derived from
/// the raw 64-bit engine output with fixed formulas so that streams are
/// reproducible across standard-library implementations and the full state
/// can be serialized.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

  /// Standard normal via Box-Muller; no cached second variate.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Mixes a master seed with a stream index (splitmix64) so that per-trial
  /// streams are independent of how many trials run.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t index);

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace npc
