#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "heatrec/types.hpp"

namespace heatrec {

// All randomness flows through this wrapper. std::mt19937_64 output is fixed
// by the standard, and the draw-to-double conversions below are spelled out
// manually, so every stream is reproducible across compilers and platforms.
// std::uniform_real_distribution and friends are deliberately avoided: their
// algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1): top 53 bits scaled down.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) {
    if (!(lo <= hi)) throw DomainError("uniform: lo must be <= hi");
    return lo + (hi - lo) * uniform01();
  }

  // Uniform on the open interval (0, 1); redraws the (measure-zero) endpoints.
  double uniform_open01() {
    double x = uniform01();
    while (x <= 0.0) x = uniform01();
    return x;
  }

  // Box-Muller; the second deviate of each pair is cached.
  double normal(double mean, double stddev) {
    if (!(stddev >= 0.0)) throw DomainError("normal: stddev must be >= 0");
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return mean + stddev * (r * std::cos(t));
  }

  // Uniform integer in [0, n); rejection keeps it unbiased.
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw DomainError("uniform_int: n must be > 0");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return x % n;
  }

  // Fisher-Yates; encapsulated here because std::shuffle's draw pattern is
  // implementation-defined.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

// Derives an independent stream seed from (base seed, purpose tag, index).
// Counter-based so that resuming never has to persist generator state: the
// stream for epoch e or sample i is recomputed from scratch on demand.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the tag
  for (const char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = detail::splitmix64(base ^ h);
  s = detail::splitmix64(s ^ index);
  return s;
}

}  // namespace heatrec
