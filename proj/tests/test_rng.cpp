#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "featgen/rng.hpp"

using featgen::Matrix;
using featgen::Rng;

TEST_CASE("same seed yields bit-identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds diverge") {
  Rng a(1), b(2);
  bool differ = false;
  for (int i = 0; i < 16 && !differ; ++i) differ = a.next_u64() != b.next_u64();
  CHECK(differ);
}

TEST_CASE("child streams are independent of parent consumption") {
  Rng a(7);
  Rng child_before = a.child(3);
  a.next_u64();
  a.next_u64();
  Rng child_after = a.child(3);
  CHECK(child_before.next_u64() == child_after.next_u64());
  Rng other = a.child(4);
  CHECK(a.child(3).next_u64() != other.next_u64());
}

TEST_CASE("sample_gaussian stddev=0 collapses to the mean") {
  Rng rng(5);
  Matrix m = featgen::sample_gaussian(rng, 3, 4, 2.5, 0.0);
  for (double v : m.raw()) CHECK(v == 2.5);
}

TEST_CASE("sample_gaussian determinism") {
  Rng a(42), b(42);
  Matrix ma = featgen::sample_gaussian(a, 10, 10, 0.0, 1.0);
  Matrix mb = featgen::sample_gaussian(b, 10, 10, 0.0, 1.0);
  for (std::size_t i = 0; i < ma.size(); ++i)
    CHECK(ma.raw()[i] == mb.raw()[i]);
}

TEST_CASE("sample_gaussian large-sample stddev") {
  Rng rng(9);
  Matrix m = featgen::sample_gaussian(rng, 100, 100, 0.0, 0.02);
  double mean = 0.0;
  for (double v : m.raw()) mean += v;
  mean /= static_cast<double>(m.size());
  double var = 0.0;
  for (double v : m.raw()) var += (v - mean) * (v - mean);
  var /= static_cast<double>(m.size() - 1);
  const double sd = std::sqrt(var);
  CHECK(sd > 0.02 * 0.95);
  CHECK(sd < 0.02 * 1.05);
}

TEST_CASE("sample_gaussian rejects negative stddev") {
  Rng rng(1);
  CHECK_THROWS_AS(featgen::sample_gaussian(rng, 1, 1, 0.0, -1.0),
                  std::invalid_argument);
}

TEST_CASE("sample_uniform degenerate interval") {
  Rng rng(1);
  Matrix m = featgen::sample_uniform(rng, 2, 2, 0.5, 0.5);
  for (double v : m.raw()) CHECK(v == 0.5);
}

TEST_CASE("sample_uniform large-sample mean and range") {
  Rng rng(3);
  Matrix m = featgen::sample_uniform(rng, 100, 100, 0.0, 1.0);
  double mean = 0.0;
  for (double v : m.raw()) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
    mean += v;
  }
  mean /= static_cast<double>(m.size());
  CHECK(std::abs(mean - 0.5) < 0.02);
}

TEST_CASE("sample_uniform rejects lo > hi") {
  Rng rng(1);
  CHECK_THROWS_AS(featgen::sample_uniform(rng, 1, 1, 1.0, 0.0),
                  std::invalid_argument);
}

TEST_CASE("index_below stays in range and shuffle permutes") {
  Rng rng(77);
  for (int i = 0; i < 200; ++i) CHECK(rng.index_below(7) < 7);
  std::vector<std::uint32_t> v{0, 1, 2, 3, 4, 5, 6, 7};
  auto sorted = v;
  rng.shuffle(v);
  auto resorted = v;
  std::sort(resorted.begin(), resorted.end());
  CHECK(resorted == sorted);
}
