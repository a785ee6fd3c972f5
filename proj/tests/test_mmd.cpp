#include <doctest.h>

#include <cmath>

#include "featgen/mmd.hpp"
#include "featgen/rng.hpp"
#include "testutil.hpp"

using featgen::KernelSpec;
using featgen::Matrix;
using featgen::Rng;

namespace {
const KernelSpec kUnit{{1.0}, {1.0}};
}

TEST_CASE("gram has unit diagonal when x == y with one unit-weight kernel") {
  Rng rng(1);
  Matrix x = testutil::random_matrix(5, 3, rng);
  Matrix k = featgen::gram(x, x, kUnit);
  for (std::size_t i = 0; i < 5; ++i)
    CHECK(k(i, i) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("gram closed form exp(-0.5)") {
  Matrix x(1, 1, {0.0});
  Matrix y(1, 1, {1.0});
  CHECK(featgen::gram(x, y, kUnit)(0, 0) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("gram symmetry when x == y") {
  Rng rng(2);
  Matrix x = testutil::random_matrix(6, 4, rng);
  Matrix k = featgen::gram(x, x, KernelSpec{});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(std::abs(k(i, j) - k(j, i)) < 1e-12);
}

TEST_CASE("gram parallel matches serial reference") {
  Rng rng(3);
  Matrix x = testutil::random_matrix(23, 7, rng);
  Matrix y = testutil::random_matrix(17, 7, rng);
  Matrix fast = featgen::gram(x, y, KernelSpec{});
  Matrix serial = featgen::gram_serial(x, y, KernelSpec{});
  for (std::size_t i = 0; i < fast.size(); ++i)
    CHECK(fast.raw()[i] == serial.raw()[i]);
}

TEST_CASE("gram rejects dimension mismatch and bad kernels") {
  Matrix x(2, 3), y(2, 4);
  CHECK_THROWS_AS(featgen::gram(x, y, kUnit), std::invalid_argument);
  KernelSpec bad{{0.0}, {}};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  KernelSpec empty{{}, {}};
  CHECK_THROWS_AS(empty.validate(), std::invalid_argument);
}

TEST_CASE("mmd2 zero on identical samples") {
  Rng rng(4);
  Matrix x = testutil::random_matrix(6, 3, rng);
  CHECK(std::abs(featgen::mmd2_biased(x, x, KernelSpec{})) < 1e-12);
}

TEST_CASE("mmd2 closed form singleton 2 - 2exp(-0.5)") {
  Matrix x(1, 1, {0.0});
  Matrix y(1, 1, {1.0});
  const double expected = 2.0 - 2.0 * std::exp(-0.5);
  CHECK(std::abs(featgen::mmd2_biased(x, y, kUnit) - expected) < 1e-9);
}

TEST_CASE("mmd2 non-negativity, symmetry, permutation invariance") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = testutil::random_matrix(5, 3, rng);
    Matrix y = testutil::random_matrix(7, 3, rng);
    const double xy = featgen::mmd2_biased(x, y, KernelSpec{});
    CHECK(xy >= 0.0);
    CHECK(std::abs(xy - featgen::mmd2_biased(y, x, KernelSpec{})) < 1e-12);
    // Swap two rows of x.
    Matrix xp = x;
    for (std::size_t c = 0; c < x.cols(); ++c)
      std::swap(xp(0, c), xp(3, c));
    CHECK(std::abs(xy - featgen::mmd2_biased(xp, y, KernelSpec{})) < 1e-12);
  }
}

TEST_CASE("mmd2 separates distributions (Monte Carlo oracle)") {
  Rng rng(6);
  Matrix a = featgen::sample_gaussian(rng, 200, 4, 0.0, 1.0);
  Matrix b = featgen::sample_gaussian(rng, 200, 4, 0.0, 1.0);
  Matrix far = featgen::sample_gaussian(rng, 200, 4, 3.0, 1.0);
  const double near_mmd = featgen::mmd2_biased(a, b, KernelSpec{});
  const double far_mmd = featgen::mmd2_biased(a, far, KernelSpec{});
  CHECK(near_mmd < far_mmd);
}

TEST_CASE("mmd2 rejects empty samples") {
  Matrix x(0, 3), y(2, 3);
  CHECK_THROWS_AS(featgen::mmd2_biased(x, y, KernelSpec{}),
                  std::invalid_argument);
}

TEST_CASE("mmd2 gradient closed form at singleton") {
  Matrix x(1, 1, {0.0});
  Matrix y(1, 1, {1.0});
  Matrix g = featgen::mmd2_gradient(x, y, kUnit);
  CHECK(g(0, 0) == doctest::Approx(-2.0 * std::exp(-0.5)).epsilon(1e-9));
}

TEST_CASE("mmd2 gradient matches finite differences") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix x = testutil::random_matrix(5, 4, rng);
    Matrix y = testutil::random_matrix(6, 4, rng);
    Matrix analytic = featgen::mmd2_gradient(x, y, KernelSpec{});
    auto loss = [&]() { return featgen::mmd2_biased(x, y, KernelSpec{}); };
    Matrix fd = testutil::fd_gradient(loss, x);
    CHECK(testutil::grad_rel_error(analytic, fd) < 1e-5);
  }
}

TEST_CASE("doubling kernel weights doubles the gradient exactly") {
  Rng rng(8);
  Matrix x = testutil::random_matrix(4, 3, rng);
  Matrix y = testutil::random_matrix(4, 3, rng);
  KernelSpec base{{1.0, 2.0}, {1.0, 1.0}};
  KernelSpec doubled{{1.0, 2.0}, {2.0, 2.0}};
  Matrix g1 = featgen::mmd2_gradient(x, y, base);
  Matrix g2 = featgen::mmd2_gradient(x, y, doubled);
  for (std::size_t i = 0; i < g1.size(); ++i)
    CHECK(g2.raw()[i] == doctest::Approx(2.0 * g1.raw()[i]).epsilon(1e-15));
}
