#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>

#include "featgen/matrix.hpp"

namespace featgen {

// xoshiro256** seeded through splitmix64. Fixed algorithm, no
// platform-dependent state: identical seeds give identical streams
// everywhere. Single-owner: never share one instance between threads;
// derive independent children with child() instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (lo > hi) {
      throw std::invalid_argument("Rng::uniform: lo > hi");
    }
    return lo + (hi - lo) * next_double();
  }

  // Box-Muller from two uniform draws; two draws are consumed per call so
  // the stream position does not depend on cached spares.
  double normal(double mean, double stddev);

  // Independent child stream derived from the original seed and a tag; the
  // parent's own stream position is untouched.
  Rng child(std::uint64_t tag) const {
    std::uint64_t s = seed_;
    s ^= 0x9e3779b97f4a7c15ULL + tag + (s << 6) + (s >> 2);
    std::uint64_t sm = s;
    return Rng(splitmix64(sm));
  }

  std::size_t index_below(std::size_t n) {
    // Modulo bias is negligible for n << 2^64.
    return static_cast<std::size_t>(next_u64() % n);
  }

  template <typename Vec>
  void shuffle(Vec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = index_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t seed_ = 0;
  std::uint64_t state_[4] = {};
};

Matrix sample_gaussian(Rng& rng, std::size_t rows, std::size_t cols,
                       double mean, double stddev);
Matrix sample_uniform(Rng& rng, std::size_t rows, std::size_t cols, double lo,
                      double hi);

}  // namespace featgen
