#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace ppgsqa {

/// SplitMix64 (Steele, Lea & Flood 2014), bit-exact on every platform.
///
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
///
/// All randomness in the library (initialization, shuffling, dropout masks,
/// corpus synthesis) is derived from instances of this generator. Derived
/// quantities are defined in terms of next_u64() only:
///   uniform()       = (next_u64() >> 11) * 2^-53, in [0, 1)
///   below(n)        = rejection sampling on the top bits, unbiased
///   normal()        = Box-Muller on two uniform() draws (cos branch only)
///   shuffle()       = Fisher-Yates from the back, j = below(i + 1)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  std::uint64_t below(std::uint64_t n);

  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(values[i - 1], values[j]);
    }
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
};

inline Rng seeded_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace ppgsqa
