// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace mref {

/// Advances `state` and returns the next splitmix64 output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Mixes a base seed with a stream tag (fold index, epoch, net counter, ...)
/// so that independent consumers get decorrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic 64-bit generator: xoshiro256++ seeded via splitmix64.
///
/// Every random choice in the project (init draws, shuffles, synthetic
/// cohorts) goes through this class so that a run is reproducible from its
/// seed alone, independent of the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01();

  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller; the paired draw is cached.
  double normal();

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t bounded(std::uint64_t n);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mref
