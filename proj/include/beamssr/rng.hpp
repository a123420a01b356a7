#pragma once

#include <cstdint>
#include <random>

namespace beamssr {

/// SplitMix64 finalizer; used to derive independent stream keys.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Per-trajectory random stream.  The engine state is a pure function of
/// (master_seed, trajectory_index), so a trajectory's output never depends on
/// which worker runs it or in which order.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t trajectory_index);

  double normal() { return normal_(engine_); }
  /// Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  /// +1 or -1 with equal probability.
  double sign() { return (engine_() >> 63) ? 1.0 : -1.0; }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline RngStream rng_stream(std::uint64_t master_seed, std::uint64_t trajectory_index) {
  return RngStream(master_seed, trajectory_index);
}

}  // namespace beamssr
