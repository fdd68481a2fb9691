#pragma once

#include <cstdint>
#include <vector>

namespace hyperdrift {

/// SplitMix64 driven in counter mode. Substreams are keyed by (seed, stream),
/// so sample i of a Monte-Carlo run always sees the same draws no matter how
/// the work is scheduled across threads.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : state_(mix(seed ^ mix(stream + kGamma))) {}

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform double in [0, 1).
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Index drawn from a discrete distribution given by probabilities.
  int next_discrete(const std::vector<double>& probs) {
    double u = next_unit();
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
  }

  int next_below(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t state_;
};

}  // namespace hyperdrift
