#include "ppgsqa/rng.hpp"

#include <cmath>
#include <numbers>

#include "ppgsqa/errors.hpp"

namespace ppgsqa {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) fail(ErrorKind::RangeError, "Rng::below(0)");
  // Largest multiple of n representable; draws above it are rejected.
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace ppgsqa
