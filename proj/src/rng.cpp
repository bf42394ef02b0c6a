#include "npc/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace npc {

double SeededRng::normal() {
  // 1 - uniform() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t SeededRng::derive(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string SeededRng::serialize() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void SeededRng::deserialize(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
}

}  // namespace npc
