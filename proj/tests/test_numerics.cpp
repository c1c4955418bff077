#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "quantlab/mat.hpp"
#include "quantlab/numerics.hpp"
#include "quantlab/prng.hpp"
#include "support/oracles.hpp"

using quantlab::numerics::Mat;
using quantlab::numerics::Prng;
using quantlab::numerics::RotationMatrix;
using quantlab::numerics::Stream;

TEST_CASE("matrix construction and element access") {
  Mat m = Mat::of({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
  CHECK_EQ(m.rows(), 2);
  CHECK_EQ(m.cols(), 3);
  CHECK_EQ(m(0, 0), 1.0);
  CHECK_EQ(m(1, 2), 6.0);
  CHECK_EQ(m[3], 4.0);  // row-major flat index

  CHECK_EQ(Mat::filled(2, 2, 7.5)(1, 1), 7.5);
  Mat id = Mat::identity(3);
  CHECK_EQ(id(0, 0), 1.0);
  CHECK_EQ(id(2, 1), 0.0);
  CHECK(Mat::scalar(4.0).is_scalar());

  CHECK_THROWS_AS(Mat(-1, 2), std::invalid_argument);
  CHECK_THROWS_AS(Mat(2, 2, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(Mat::of({{1.0, 2.0}, {3.0}}), std::invalid_argument);
}

TEST_CASE("matrix storage reuse keeps shape bookkeeping consistent") {
  Mat m(2, 3);
  m(1, 2) = 9.0;
  m.reuse_zero(3, 2);
  CHECK_EQ(m.rows(), 3);
  CHECK_EQ(m.cols(), 2);
  for (int i = 0; i < m.size(); ++i) CHECK_EQ(m[i], 0.0);
  m.reuse_shape(1, 4);
  CHECK_EQ(m.rows(), 1);
  CHECK_EQ(m.size(), 4);
}

TEST_CASE("matrix product matches a hand-computed example") {
  const Mat a = Mat::of({{1.0, 2.0}, {3.0, 4.0}});
  const Mat b = Mat::of({{5.0, 6.0}, {7.0, 8.0}});
  const Mat c = quantlab::numerics::matmul_plain(a, b);
  CHECK_EQ(c(0, 0), 19.0);
  CHECK_EQ(c(0, 1), 22.0);
  CHECK_EQ(c(1, 0), 43.0);
  CHECK_EQ(c(1, 1), 50.0);

  CHECK_THROWS_AS(quantlab::numerics::matmul_plain(a, Mat(3, 2)), std::invalid_argument);
}

TEST_CASE("matrix product against a naive triple loop on random shapes") {
  Prng prng(42, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + static_cast<int>(prng.next_u64() % 7);
    const int k = 1 + static_cast<int>(prng.next_u64() % 7);
    const int n = 1 + static_cast<int>(prng.next_u64() % 7);
    const Mat a = quantlab::numerics::gaussian_matrix(prng, m, k);
    const Mat b = quantlab::numerics::gaussian_matrix(prng, k, n);
    const Mat c = quantlab::numerics::matmul_plain(a, b);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int t = 0; t < k; ++t) s += a(i, t) * b(t, j);
        CHECK(std::fabs(c(i, j) - s) < 1e-12);
      }
    }
  }
}

TEST_CASE("transpose swaps rows and columns") {
  const Mat t = quantlab::numerics::transpose(Mat::of({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}}));
  CHECK_EQ(t.rows(), 3);
  CHECK_EQ(t.cols(), 2);
  CHECK_EQ(t(0, 1), 4.0);
  CHECK_EQ(t(2, 0), 3.0);
}

TEST_CASE("max_abs_diff compares elementwise and rejects shape mismatch") {
  CHECK_EQ(quantlab::numerics::max_abs_diff(Mat::of({{1.0, 2.0}}), Mat::of({{1.5, 2.25}})), 0.5);
  CHECK_THROWS_AS(quantlab::numerics::max_abs_diff(Mat(1, 2), Mat(2, 1)), std::invalid_argument);
}

TEST_CASE("generator reproduces the same sequence for the same seed and stream") {
  Prng a(123, Stream::kData);
  Prng b(123, Stream::kData);
  for (int i = 0; i < 64; ++i) CHECK_EQ(a.next_u64(), b.next_u64());

  Prng c(123, Stream::kData);
  Prng d = c.clone_with_stream(static_cast<std::uint64_t>(Stream::kData));
  for (int i = 0; i < 16; ++i) CHECK_EQ(c.next_u64(), d.next_u64());
}

TEST_CASE("distinct streams and seeds give distinct sequences") {
  Prng a(123, Stream::kData);
  Prng b(123, Stream::kNoise);
  Prng c(124, Stream::kData);
  int diff_stream = 0, diff_seed = 0;
  for (int i = 0; i < 16; ++i) {
    const std::uint64_t va = a.next_u64();
    if (va != b.next_u64()) ++diff_stream;
    if (va != c.next_u64()) ++diff_seed;
  }
  CHECK(diff_stream >= 15);
  CHECK(diff_seed >= 15);
}

TEST_CASE("uniform doubles stay in the half-open unit interval with the right mean") {
  Prng prng(7, 0);
  const int n = 1000000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = prng.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::fabs(sum / n - 0.5) < 0.005);
}

TEST_CASE("normal draws match standard moments at a million samples") {
  Prng prng(11, 0);
  const int n = 1000000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = prng.next_gaussian();
    sum += g;
    sumsq += g * g;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(std::fabs(std::sqrt(var) - 1.0) < 0.01);
}

TEST_CASE("gaussian matrix fill order is row-major and matches raw draws") {
  Prng a(5, Stream::kData);
  Prng b(5, Stream::kData);
  const Mat m = quantlab::numerics::gaussian_matrix(a, 3, 4);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) CHECK_EQ(m(i, j), b.next_gaussian());

  Prng c(5, Stream::kData);
  Mat f(3, 4);
  quantlab::numerics::gaussian_fill(c, f);
  CHECK_EQ(quantlab::numerics::max_abs_diff(m, f), 0.0);
}

TEST_CASE("random rotation is orthonormal") {
  Prng prng(1, Stream::kRotation);
  const RotationMatrix rot = quantlab::numerics::qr_rotation(prng, 30);
  const Mat qtq = quantlab::numerics::matmul_plain(quantlab::numerics::transpose(rot.q), rot.q);
  CHECK(quantlab::numerics::max_abs_diff(qtq, Mat::identity(30)) < 1e-10);
}

TEST_CASE("rotation inverse recovers the original frames") {
  Prng prng(2, Stream::kRotation);
  const RotationMatrix rot = quantlab::numerics::qr_rotation(prng, 30);
  const Mat x = quantlab::numerics::gaussian_matrix(prng, 30, 100);
  const Mat back = rot.invert(rot.apply(x));
  CHECK(quantlab::numerics::max_abs_diff(back, x) < 1e-9);
}

TEST_CASE("rotation determinant has unit magnitude") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    Prng prng(seed, Stream::kRotation);
    const RotationMatrix rot = quantlab::numerics::qr_rotation(prng, 12);
    CHECK(std::fabs(std::fabs(oracles::lu_det(rot.q)) - 1.0) < 1e-8);
  }
}

TEST_CASE("rotation eigenvalues lie on the unit circle") {
  Prng prng(3, Stream::kRotation);
  const RotationMatrix rot = quantlab::numerics::qr_rotation(prng, 5);
  const auto roots = oracles::poly_roots(oracles::char_poly(rot.q));
  REQUIRE_EQ(roots.size(), 5);
  for (const auto& r : roots) CHECK(std::fabs(std::abs(r) - 1.0) < 1e-8);
}

TEST_CASE("rotation triangularizes its source matrix with a non-negative diagonal") {
  Prng draws(4, Stream::kRotation);
  Prng again(4, Stream::kRotation);
  const Mat a = quantlab::numerics::gaussian_matrix(draws, 8, 8);
  const RotationMatrix rot = quantlab::numerics::qr_rotation(again, 8);
  // R = Q^T A must be upper-triangular with non-negative diagonal: that is
  // the sign convention that makes the rotation distribution uniform.
  const Mat r = quantlab::numerics::matmul_plain(quantlab::numerics::transpose(rot.q), a);
  for (int i = 0; i < 8; ++i) {
    CHECK(r(i, i) >= 0.0);
    for (int j = 0; j < i; ++j) CHECK(std::fabs(r(i, j)) < 1e-10);
  }
}

TEST_CASE("rotation preserves gram spectra") {
  Prng prng(6, Stream::kRotation);
  for (int p = 2; p <= 6; ++p) {
    const RotationMatrix rot = quantlab::numerics::qr_rotation(prng, p);
    const Mat x = quantlab::numerics::gaussian_matrix(prng, p, 40);
    const Mat y = rot.apply(x);
    const Mat gx = quantlab::numerics::matmul_plain(x, quantlab::numerics::transpose(x));
    const Mat gy = quantlab::numerics::matmul_plain(y, quantlab::numerics::transpose(y));
    const auto ex = oracles::jacobi_eigenvalues(gx);
    const auto ey = oracles::jacobi_eigenvalues(gy);
    for (int i = 0; i < p; ++i) CHECK(std::fabs(ex[i] - ey[i]) < 1e-8);
  }
}

TEST_CASE("rotation generation is deterministic and seed-sensitive") {
  Prng a(9, Stream::kRotation);
  Prng b(9, Stream::kRotation);
  Prng c(10, Stream::kRotation);
  const RotationMatrix qa = quantlab::numerics::qr_rotation(a, 10);
  const RotationMatrix qb = quantlab::numerics::qr_rotation(b, 10);
  const RotationMatrix qc = quantlab::numerics::qr_rotation(c, 10);
  CHECK_EQ(quantlab::numerics::max_abs_diff(qa.q, qb.q), 0.0);
  CHECK(quantlab::numerics::max_abs_diff(qa.q, qc.q) > 1e-3);
}

TEST_CASE("one-dimensional rotation is a unit scalar") {
  Prng prng(13, Stream::kRotation);
  const RotationMatrix rot = quantlab::numerics::qr_rotation(prng, 1);
  CHECK(std::fabs(std::fabs(rot.q(0, 0)) - 1.0) < 1e-12);
  CHECK_THROWS_AS(quantlab::numerics::qr_rotation(prng, 0), std::invalid_argument);
}
