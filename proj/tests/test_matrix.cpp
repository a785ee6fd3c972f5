#include <doctest.h>

#include "featgen/matrix.hpp"
#include "testutil.hpp"

using featgen::Matrix;
using featgen::Rng;

TEST_CASE("matmul identity") {
  Matrix eye(2, 2, {1, 0, 0, 1});
  Matrix a(2, 2, {1, 2, 3, 4});
  Matrix out = featgen::matmul(eye, a);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out.raw()[i] == a.raw()[i]);
}

TEST_CASE("matmul 1x1 by hand") {
  Matrix a(1, 2, {1, 2});
  Matrix b(2, 1, {3, 4});
  CHECK(featgen::matmul(a, b)(0, 0) == 11.0);
}

TEST_CASE("matmul vs triple-loop oracle") {
  Rng rng(11);
  Matrix a = testutil::random_matrix(5, 7, rng);
  Matrix b = testutil::random_matrix(7, 3, rng);
  Matrix fast = featgen::matmul(a, b);
  Matrix ref = testutil::naive_matmul(a, b);
  for (std::size_t i = 0; i < fast.size(); ++i)
    CHECK(fast.raw()[i] == doctest::Approx(ref.raw()[i]).epsilon(1e-12));
}

TEST_CASE("matmul parallel vs serial reference") {
  Rng rng(12);
  Matrix a = testutil::random_matrix(33, 17, rng);
  Matrix b = testutil::random_matrix(17, 29, rng);
  Matrix fast = featgen::matmul(a, b);
  Matrix serial = featgen::matmul_serial(a, b);
  for (std::size_t i = 0; i < fast.size(); ++i)
    CHECK(fast.raw()[i] == serial.raw()[i]);
}

TEST_CASE("matmul shape error names both shapes") {
  Matrix a(2, 3);
  Matrix b(4, 2);
  CHECK_THROWS_WITH_AS(featgen::matmul(a, b),
                       doctest::Contains("2x3"), std::invalid_argument);
  try {
    featgen::matmul(a, b);
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("4x2") != std::string::npos);
  }
}

TEST_CASE("matmul associativity") {
  Rng rng(13);
  Matrix a = testutil::random_matrix(4, 6, rng);
  Matrix b = testutil::random_matrix(6, 5, rng);
  Matrix c = testutil::random_matrix(5, 3, rng);
  Matrix left = featgen::matmul(featgen::matmul(a, b), c);
  Matrix right = featgen::matmul(a, featgen::matmul(b, c));
  CHECK(testutil::grad_rel_error(left, right) < 1e-9);
}

TEST_CASE("transpose involution is exact") {
  Rng rng(14);
  Matrix a = testutil::random_matrix(6, 9, rng);
  Matrix back = featgen::transpose(featgen::transpose(a));
  REQUIRE(back.rows() == a.rows());
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(back.raw()[i] == a.raw()[i]);
}

TEST_CASE("elementwise ops and concatenation") {
  Matrix a(2, 2, {1, 2, 3, 4});
  Matrix b(2, 2, {5, 6, 7, 8});
  CHECK(featgen::add(a, b)(1, 1) == 12);
  CHECK(featgen::sub(b, a)(0, 0) == 4);
  CHECK(featgen::hadamard(a, b)(0, 1) == 12);
  CHECK(featgen::scale(a, 2.0)(1, 0) == 6);
  Matrix h = featgen::hcat(a, b);
  CHECK(h.cols() == 4);
  CHECK(h(0, 2) == 5);
  Matrix v = featgen::vcat(a, b);
  CHECK(v.rows() == 4);
  CHECK(v(2, 0) == 5);
}

TEST_CASE("row_sqdist by hand") {
  Matrix a(1, 2, {0, 0});
  Matrix b(1, 2, {3, 4});
  CHECK(featgen::row_sqdist(a, 0, b, 0) == doctest::Approx(25).epsilon(1e-15));
}

TEST_CASE("cholesky_solve solves the regularized normal equations") {
  Rng rng(15);
  Matrix x = testutil::random_matrix(12, 4, rng);
  Matrix a = featgen::matmul(featgen::transpose(x), x);  // SPD
  Matrix b = testutil::random_matrix(4, 2, rng);
  const double lambda = 0.1;
  Matrix sol = featgen::cholesky_solve(a, b, lambda);
  // (A + lambda*I) * sol should reproduce b.
  Matrix reg = a;
  for (std::size_t i = 0; i < reg.rows(); ++i) reg(i, i) += lambda;
  Matrix back = featgen::matmul(reg, sol);
  for (std::size_t i = 0; i < b.size(); ++i)
    CHECK(back.raw()[i] == doctest::Approx(b.raw()[i]).epsilon(1e-9));
}

TEST_CASE("all_finite flags NaN") {
  Matrix a(1, 2, {1.0, 2.0});
  CHECK(featgen::all_finite(a));
  a(0, 1) = std::nan("");
  CHECK_FALSE(featgen::all_finite(a));
}
