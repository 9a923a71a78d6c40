#pragma once

#include <cstdint>
#include <random>

namespace doseresp {

/// SplitMix64 finalizer. Used to turn small consecutive seeds into
/// well-separated engine states.
std::uint64_t splitmix64(std::uint64_t x);

/// Seed for chain `chain` of a run seeded with `base`. Chains use
/// consecutive seeds; the engine scrambles them through splitmix64.
inline std::uint64_t chain_seed(std::uint64_t base, int chain) {
  return base + static_cast<std::uint64_t>(chain);
}

/// Seedable generator with hand-written variate transforms so that draws are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer on the closed range [lo, hi].
  int uniform_int(int lo, int hi);
  double normal();
  int binomial(int trials, double p);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace doseresp
