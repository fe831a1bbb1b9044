#include "oracles.hpp"

#include "sphattn/sphere_harmonics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace sphattn;

TEST_SUITE("sphere_harmonics") {

TEST_CASE("harmonic_dim small cases") {
  CHECK(harmonic_dim(7, 0) == 1);
  CHECK(harmonic_dim(3, 2) == 5);
  CHECK(harmonic_dim(2, 3) == 2);
  CHECK(harmonic_dim(4, 2) == 9);
}

TEST_CASE("harmonic_dim matches classical counts in d = 3 and d = 4") {
  for (int l = 0; l <= 20; ++l) {
    CHECK(harmonic_dim(3, l) == static_cast<std::uint64_t>(2 * l + 1));
    CHECK(harmonic_dim(4, l) == static_cast<std::uint64_t>((l + 1) * (l + 1)));
  }
}

TEST_CASE("harmonic_dim agrees with the monomial-count difference") {
  for (int d = 2; d <= 12; ++d)
    for (int l = 0; l <= 10; ++l)
      CHECK(static_cast<double>(harmonic_dim(d, l)) == doctest::Approx(oracle::harmonic_count(d, l)).epsilon(1e-15));
}

TEST_CASE("harmonic_dim rejects bad input and overflow") {
  CHECK_THROWS_AS(harmonic_dim(1, 2), InvalidArgument);
  CHECK_THROWS_AS(harmonic_dim(3, -1), InvalidArgument);
  CHECK_THROWS_AS(harmonic_dim(400, 400), std::overflow_error);
  CHECK_THROWS_AS(cumulative_dim(400, 400), std::overflow_error);
}

TEST_CASE("cumulative_dim") {
  CHECK(cumulative_dim(5, 0) == 1);
  CHECK(cumulative_dim(3, 2) == 9);
  CHECK(cumulative_dim(2, 4) == 9);
}

TEST_CASE("gegenbauer_all fixed values") {
  const auto ones = gegenbauer_all(1.0, 9, 4);
  for (double v : ones) CHECK(v == 1.0);

  const auto legendre = gegenbauer_all(0.5, 3, 2);
  CHECK(legendre[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(legendre[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(legendre[2] == doctest::Approx(-0.125).epsilon(1e-15));

  const auto cheb = gegenbauer_all(std::cos(M_PI / 3.0), 2, 3);
  CHECK(std::abs(cheb[0] - 1.0) <= 1e-12);
  CHECK(std::abs(cheb[1] - 0.5) <= 1e-12);
  CHECK(std::abs(cheb[2] + 0.5) <= 1e-12);
  CHECK(std::abs(cheb[3] + 1.0) <= 1e-12);
}

TEST_CASE("d = 3 equals Legendre closed forms and d = 2 equals cos(k theta)") {
  for (int i = 0; i <= 400; ++i) {
    const double t = -1.0 + 2.0 * i / 400.0;
    const auto p = gegenbauer_all(t, 3, 4);
    for (int l = 0; l <= 4; ++l) CHECK(std::abs(p[static_cast<std::size_t>(l)] - oracle::legendre(l, t)) <= 1e-12);
    const double theta = M_PI * i / 400.0;
    const auto c = gegenbauer_all(std::cos(theta), 2, 10);
    for (int k = 0; k <= 10; ++k) CHECK(std::abs(c[static_cast<std::size_t>(k)] - std::cos(k * theta)) <= 1e-12);
  }
}

TEST_CASE("values stay in [-1, 1] and satisfy the three-term relation") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int d = 2; d <= 12; ++d) {
    const int L = 12;
    for (int s = 0; s < 10000; ++s) {
      const double t = unif(gen);
      const auto p = gegenbauer_all(t, d, L);
      for (double v : p) REQUIRE(std::abs(v) <= 1.0 + 1e-14);
      for (int k = 1; k < L; ++k) {
        const double kk = k;
        const double lhs = t * p[static_cast<std::size_t>(k)];
        const double rhs = kk / (2 * kk + d - 2) * p[static_cast<std::size_t>(k - 1)] +
                           (kk + d - 2) / (2 * kk + d - 2) * p[static_cast<std::size_t>(k + 1)];
        REQUIRE(std::abs(lhs - rhs) <= 1e-12);
      }
    }
  }
}

TEST_CASE("argument tolerance band") {
  CHECK_NOTHROW(gegenbauer_all(1.0 + 5e-13, 3, 2));
  CHECK(gegenbauer_all(1.0 + 5e-13, 3, 2)[2] == 1.0);
  CHECK_THROWS_AS(gegenbauer_all(1.0 + 1e-9, 3, 2), InvalidArgument);
  CHECK_THROWS_AS(gegenbauer_all(0.3, 1, 2), InvalidArgument);
}

TEST_CASE("GegenbauerRecurrence matches gegenbauer_all") {
  const GegenbauerRecurrence rec(6, 7);
  std::vector<double> out(8);
  const std::vector<double> w{0.5, -1.0, 2.0, 0.25};
  for (double t : {-1.0, -0.3, 0.0, 0.71, 1.0}) {
    rec.eval(t, out);
    const auto ref = gegenbauer_all(t, 6, 7);
    for (std::size_t l = 0; l < ref.size(); ++l) CHECK(out[l] == doctest::Approx(ref[l]).epsilon(1e-14));
    double sum = 0.0;
    for (std::size_t l = 0; l < w.size(); ++l) sum += w[l] * ref[l];
    CHECK(rec.weighted_sum(t, w) == doctest::Approx(sum).epsilon(1e-14));
  }
}

TEST_CASE("gegenbauer_matrix") {
  const auto ones = gegenbauer_matrix(Matrix::Ones(3, 4), 4, 2);
  REQUIRE(ones.size() == 3);
  for (const Matrix& m : ones) CHECK(m.isApproxToConstant(1.0));

  const auto single = gegenbauer_matrix(Matrix::Constant(1, 1, 0.5), 3, 2);
  CHECK(single[0](0, 0) == doctest::Approx(1.0));
  CHECK(single[1](0, 0) == doctest::Approx(0.5));
  CHECK(single[2](0, 0) == doctest::Approx(-0.125));

  Matrix g(2, 2);
  g << 1.0, 0.3, 0.3, 1.0;
  for (const Matrix& m : gegenbauer_matrix(g, 5, 4)) CHECK(m(0, 1) == m(1, 0));

  Matrix bad = Matrix::Zero(2, 2);
  bad(1, 0) = 1.5;
  try {
    gegenbauer_matrix(bad, 3, 2);
    FAIL("expected an exception");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("(1, 0)") != std::string::npos);
  }
}

TEST_CASE("sample_sphere") {
  const Matrix x = sample_sphere(3, 2, 7);
  for (Eigen::Index i = 0; i < x.rows(); ++i) CHECK(std::abs(x.row(i).norm() - 1.0) <= 1e-12);

  const Matrix big = sample_sphere(10000, 5, 1);
  const Vector means = big.colwise().mean();
  for (Eigen::Index c = 0; c < means.size(); ++c) CHECK(std::abs(means(c)) < 0.05);

  CHECK(sample_sphere(50, 4, 99) == sample_sphere(50, 4, 99));
  CHECK(sample_sphere(50, 4, 99) != sample_sphere(50, 4, 100));
  CHECK_THROWS_AS(sample_sphere(0, 3, 1), InvalidArgument);
  CHECK_THROWS_AS(sample_sphere(5, 1, 1), InvalidArgument);
}

TEST_CASE("sample_sphere prefixes are stable across counts") {
  const Matrix small = sample_sphere(5000, 3, 4);
  const Matrix large = sample_sphere(9000, 3, 4);
  CHECK(large.topRows(5000) == small);
}

TEST_CASE("Monte Carlo orthogonality of zonal polynomials") {
  const int d = 3;
  const std::size_t draws = 1000000;
  const Matrix w = sample_sphere(draws, d, 2024);
  Vector x(3), xp(3);
  x << 1.0, 0.0, 0.0;
  xp << 0.6, 0.8, 0.0;
  const double cos_xxp = x.dot(xp);
  for (int j = 0; j <= 2; ++j) {
    for (int k = 0; k <= 2; ++k) {
      double sum = 0.0, sum_sq = 0.0;
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const double v = oracle::legendre(j, w.row(i).dot(x)) * oracle::legendre(k, w.row(i).dot(xp));
        sum += v;
        sum_sq += v * v;
      }
      const double n = static_cast<double>(draws);
      const double mean = sum / n;
      const double se = std::sqrt((sum_sq / n - mean * mean) / n);
      const double expected = j == k ? oracle::legendre(k, cos_xxp) / (2.0 * k + 1.0) : 0.0;
      CHECK(std::abs(mean - expected) <= 5.0 * se);
    }
  }
}

}  // TEST_SUITE
