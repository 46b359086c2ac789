#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ci {

// Error taxonomy. Everything thrown by the library derives from Error, so
// callers can distinguish "bad input" from "blew up while running".
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
// Shape/dimension mismatch between tensors or model pieces.
struct DimError : Error {
  using Error::Error;
};
// An API contract was violated (non-scalar objective, domain violation, ...).
struct ContractError : Error {
  using Error::Error;
};
// Problem size exceeds what a brute-force/enumeration path supports.
struct ScaleError : Error {
  using Error::Error;
};
// Invalid configuration (infeasible sizes, bad ranges, unknown options).
struct ConfigError : Error {
  using Error::Error;
};
// Malformed files or datasets.
struct DataError : Error {
  using Error::Error;
};
// Optimization diverged or produced non-finite values.
struct TrainingError : Error {
  using Error::Error;
};
// A reference implementation disagreed with the fast path.
struct OracleError : Error {
  using Error::Error;
};

// FNV-1a 64-bit. Used for config hashes and output integrity checks; the
// value is part of the on-disk format, so the algorithm must never change.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v);

// Deterministic PRNG (SplitMix64). Hand-rolled so that generated datasets are
// bit-identical across platforms and standard library versions; std::mt19937
// would be fine but std::normal_distribution is not portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_int(std::uint64_t n);

  // Standard normal via Box-Muller (one value per call, no cached spare, so
  // the stream position is a pure function of the call count).
  double gaussian();

  double gaussian(double mean, double var);

 private:
  std::uint64_t state_;
};

// Derives an independent stream for (root seed, purpose, index). Purpose tags
// keep e.g. dataset sampling and parameter init decoupled: drawing more of
// one never shifts the other.
Rng substream(std::uint64_t seed, std::string_view purpose, std::uint64_t index);

}  // namespace ci
