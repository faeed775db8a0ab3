#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace targetpop {

// splitmix64 finalizer; good avalanche, used to derive independent streams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic stream derived from (seed, s1, s2). Streams for distinct
// (s1, s2) are independent of execution order and thread count.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t s1,
                                std::uint64_t s2 = 0) {
  const std::uint64_t a = mix64(seed);
  const std::uint64_t b = mix64(a ^ mix64(s1 + 0x0100000001b3ULL));
  const std::uint64_t c = mix64(b ^ mix64(s2 + 0xcbf29ce484222325ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return std::mt19937_64(seq);
}

// Draws built directly on the (standardized) mt19937_64 output so that
// results do not depend on the standard library's distribution
// implementations.
class RandomStream {
 public:
  explicit RandomStream(std::mt19937_64 gen) : gen_(gen) {}
  RandomStream(std::uint64_t seed, std::uint64_t s1, std::uint64_t s2 = 0)
      : gen_(make_rng(seed, s1, s2)) {}

  // uniform on [0, 1) with 53-bit resolution
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal via Box-Muller; the second variate of each pair is cached
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
  }

  // uniform index in [0, n) without modulo bias
  std::size_t uniform_index(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    for (;;) {
      const std::uint64_t draw = gen_();
      if (draw < limit) return static_cast<std::size_t>(draw % bound);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace targetpop
