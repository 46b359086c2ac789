#include "ci/common.hpp"

#include <cmath>
#include <cstdio>

namespace ci {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw ContractError("uniform_int: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % n;
}

double Rng::gaussian() {
  // u1 in (0,1] so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::gaussian(double mean, double var) {
  if (!(var >= 0.0)) throw ContractError("gaussian: variance must be >= 0");
  return mean + std::sqrt(var) * gaussian();
}

Rng substream(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
  std::uint64_t h = fnv1a(purpose);
  // Mix seed, purpose hash and index through one extra SplitMix64 round each
  // so nearby (seed, index) pairs land far apart.
  Rng r(seed ^ (h * 0x2545f4914f6cdd1dull) ^ (index * 0x9e3779b97f4a7c15ull));
  r.next_u64();
  return r;
}

}  // namespace ci
