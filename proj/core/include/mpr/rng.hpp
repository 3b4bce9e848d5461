#pragma once

#include <cstdint>
#include <span>

namespace mpr {

// SplitMix64 finalizer. Used for seeding and for deriving independent sub-seeds.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mixes a salt into a seed so that each consumer gets its own stream.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t state = seed ^ (salt * 0xd1342543de82ef95ULL);
  return splitmix64(state);
}

// xoshiro256** seeded through SplitMix64. All derived draws (uniform, below,
// weighted) are implemented here rather than through <random> distributions, whose
// output is implementation-defined, so streams are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept;

  // Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  // Always consumes exactly one draw.
  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Index drawn proportionally to nonnegative weights; consumes one draw.
  // Returns weights.size() when all weights are zero.
  std::size_t weighted(std::span<const double> weights) noexcept;

 private:
  std::uint64_t s_[4];
};

}  // namespace mpr
