#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "voxstate/matrix.hpp"
#include "voxstate/rng.hpp"

using voxstate::Matrix;
using voxstate::Rng;

namespace {

// Plain triple loop, kept independent of the library kernel.
Matrix reference_mm(bool ta, bool tb, const Matrix& a, const Matrix& b,
                    double alpha) {
  const std::size_t m = ta ? a.cols() : a.rows();
  const std::size_t k = ta ? a.rows() : a.cols();
  const std::size_t n = tb ? b.rows() : b.cols();
  Matrix c(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        acc += (ta ? a(p, i) : a(i, p)) * (tb ? b(j, p) : b(p, j));
      c(i, j) = alpha * acc;
    }
  return c;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Matrix m(r, c);
  Rng rng(seed);
  voxstate::fill_normal(m, rng);
  return m;
}

double max_rel_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double scale = std::max({std::abs(a(i, j)), std::abs(b(i, j)), 1.0});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / scale);
    }
  return worst;
}

}  // namespace

TEST_CASE("matmul matches a hand-worked product") {
  Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
  Matrix c = voxstate::matmul(a, b);
  CHECK(c(0, 0) == 58.0);
  CHECK(c(0, 1) == 64.0);
  CHECK(c(1, 0) == 139.0);
  CHECK(c(1, 1) == 154.0);
}

TEST_CASE("matmul rejects mismatched shapes") {
  Matrix a(2, 3);
  Matrix b(2, 3);
  CHECK_THROWS_AS(voxstate::matmul(a, b), voxstate::config_error);
}

TEST_CASE("gemm agrees with the reference across both kernel regimes") {
  // 30^3 stays on the small-product path, 48^3 forces packing.
  for (std::size_t n : {7ul, 30ul, 48ul, 70ul}) {
    Matrix a = random_matrix(n, n, 100 + n);
    Matrix b = random_matrix(n, n, 200 + n);
    Matrix c(n, n);
    voxstate::gemm(false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0,
                   c.data(), n);
    CHECK(max_rel_diff(c, reference_mm(false, false, a, b, 1.0)) < 1e-12);
  }
}

TEST_CASE("gemm handles every transpose combination") {
  const std::size_t m = 13, n = 17, k = 11;
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      Matrix a = ta ? random_matrix(k, m, 31) : random_matrix(m, k, 31);
      Matrix b = tb ? random_matrix(n, k, 32) : random_matrix(k, n, 32);
      Matrix c(m, n);
      voxstate::gemm(ta, tb, m, n, k, 2.5, a.data(), a.cols(), b.data(),
                     b.cols(), 0.0, c.data(), n);
      CHECK(max_rel_diff(c, reference_mm(ta, tb, a, b, 2.5)) < 1e-12);
    }
}

TEST_CASE("gemm with beta zero never reads the output buffer") {
  const std::size_t n = 6;
  Matrix a = random_matrix(n, n, 41);
  Matrix b = random_matrix(n, n, 42);
  Matrix c(n, n);
  for (std::size_t i = 0; i < c.size(); ++i)
    c.data()[i] = std::numeric_limits<double>::quiet_NaN();
  voxstate::gemm(false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0,
                 c.data(), n);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(std::isfinite(c.data()[i]));
}

TEST_CASE("gemm accumulates with beta") {
  const std::size_t n = 5;
  Matrix a = random_matrix(n, n, 51);
  Matrix b = random_matrix(n, n, 52);
  Matrix c0 = random_matrix(n, n, 53);
  Matrix c = c0;
  voxstate::gemm(false, false, n, n, n, 1.5, a.data(), n, b.data(), n, 2.0,
                 c.data(), n);
  Matrix ab = reference_mm(false, false, a, b, 1.5);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      CHECK(c(i, j) ==
            doctest::Approx(ab(i, j) + 2.0 * c0(i, j)).epsilon(1e-12));
}

TEST_CASE("fused transpose products are bit-identical to explicit ones") {
  for (std::size_t n : {9ul, 45ul}) {
    Matrix a = random_matrix(n + 2, n, 61);
    Matrix b = random_matrix(n + 2, n, 62);
    Matrix fused = voxstate::matmul_at_b(a, b);
    Matrix expl = voxstate::matmul(voxstate::transpose(a), b);
    REQUIRE(fused.same_shape(expl));
    for (std::size_t i = 0; i < fused.size(); ++i)
      CHECK(fused.data()[i] == expl.data()[i]);

    Matrix fused2 = voxstate::matmul_a_bt(a, b);
    Matrix expl2 = voxstate::matmul(a, voxstate::transpose(b));
    REQUIRE(fused2.same_shape(expl2));
    for (std::size_t i = 0; i < fused2.size(); ++i)
      CHECK(fused2.data()[i] == expl2.data()[i]);
  }
}

TEST_CASE("gemm is bit-deterministic across calls") {
  const std::size_t n = 50;
  Matrix a = random_matrix(n, n, 71);
  Matrix b = random_matrix(n, n, 72);
  Matrix c1(n, n), c2(n, n);
  voxstate::gemm(false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0,
                 c1.data(), n);
  voxstate::gemm(false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0,
                 c2.data(), n);
  for (std::size_t i = 0; i < c1.size(); ++i)
    CHECK(c1.data()[i] == c2.data()[i]);
}

TEST_CASE("transpose is an involution") {
  Matrix a = random_matrix(11, 7, 81);
  Matrix back = voxstate::transpose(voxstate::transpose(a));
  REQUIRE(back.same_shape(a));
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(back.data()[i] == a.data()[i]);
}

TEST_CASE("frobenius norm and normalization") {
  Matrix a(2, 2, {3, 0, 0, 4});
  CHECK(voxstate::frobenius_norm(a) == doctest::Approx(5.0));
  voxstate::frobenius_normalize(a);
  CHECK(voxstate::frobenius_norm(a) == doctest::Approx(1.0).epsilon(1e-15));
  // Normalizing twice changes nothing beyond rounding.
  Matrix b = a;
  voxstate::frobenius_normalize(b);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(b.data()[i] == doctest::Approx(a.data()[i]).epsilon(1e-15));

  Matrix zero(3, 3);
  CHECK_THROWS_AS(voxstate::frobenius_normalize(zero), voxstate::numeric_error);
}

TEST_CASE("matrix construction validates the value count") {
  CHECK_THROWS_AS(Matrix(2, 2, {1.0, 2.0, 3.0}), voxstate::config_error);
}
