#pragma once

#include <cstdint>
#include <random>

namespace bitattn {

// Seeded RNG wrapper. The raw engine is standard mt19937_64 (identical output
// everywhere), and all value mappings are done by hand instead of through
// std::uniform_*_distribution, whose sequences differ between standard
// library implementations. Every random choice in the library and tools goes
// through this class so runs are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform double in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], both ends included. Uses modulo reduction;
  // the bias is ~2^-64 * span, irrelevant for our span sizes.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1u;
    return lo + static_cast<std::int64_t>(eng_() % span);
  }

  bool coin(double p = 0.5) { return uniform() < p; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace bitattn
