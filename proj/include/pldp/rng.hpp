#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pldp/error.hpp"

namespace pldp {

namespace detail {

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic RNG: a named stream over mt19937_64. All sampling used by the
// project goes through this type so results depend only on (seed, call order),
// never on platform library details. Distributions are implemented here for
// the same reason: libstdc++ does not pin their sampling algorithms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(detail::splitmix64(seed)), seed_(seed) {}

  // Independent substream addressed by tag; depends only on (seed, tag), not
  // on how much this stream has been consumed.
  Rng child(std::string_view tag) const {
    return Rng(detail::splitmix64(seed_ ^ detail::fnv1a64(tag)));
  }
  Rng child(std::string_view tag, uint64_t index) const {
    return Rng(detail::splitmix64(seed_ ^ detail::fnv1a64(tag)) + index);
  }

  uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), rejection-sampled so every value is equally likely.
  int64_t uniform_int(int64_t n) {
    if (n <= 0) throw ConfigError("uniform_int: n must be positive, got " + std::to_string(n));
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<int64_t>(x % un);
  }

  // Standard normal via Box-Muller; second value cached.
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Poisson by inverse-CDF product (Knuth); fine for the small means used here.
  int poisson(double lambda) {
    if (lambda < 0.0) throw ConfigError("poisson: lambda must be >= 0");
    if (lambda == 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> shuffled_indices(int n) {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    for (int i = n - 1; i > 0; --i) {
      const int64_t j = uniform_int(i + 1);
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    return idx;
  }

  uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 eng_;
  uint64_t seed_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

// First `count` entries of a partial Fisher-Yates shuffle of `pool`:
// a uniform sample without replacement.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> pool, size_t count, Rng& rng) {
  if (count > pool.size())
    throw SamplingError("sample_without_replacement: count " + std::to_string(count) +
                        " exceeds pool size " + std::to_string(pool.size()));
  for (size_t i = 0; i < count; ++i) {
    const size_t j = i + static_cast<size_t>(rng.uniform_int(static_cast<int64_t>(pool.size() - i)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace pldp
