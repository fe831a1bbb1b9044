#include "sphattn/complexity.hpp"
#include "sphattn/kernel_engine.hpp"
#include "sphattn/sphere_harmonics.hpp"

#include <doctest.h>

#include <cmath>

using namespace sphattn;

TEST_SUITE("complexity") {

TEST_CASE("empirical complexity values") {
  CHECK(empirical_complexity(KernelSpectrum::empirical(Vector::Zero(5), 5), 0.3) == 0.0);
  Vector ev(2);
  ev << 4.0, 1.0;
  const KernelSpectrum s = KernelSpectrum::empirical(ev, 2);
  CHECK(empirical_complexity(s, 1.0) == doctest::Approx(1.0));
  CHECK(empirical_complexity(s, 1e3) == doctest::Approx(std::sqrt(5.0 / 2.0)));
  CHECK_THROWS_AS(empirical_complexity(s, 0.0), InvalidArgument);
  CHECK_THROWS_AS(KernelSpectrum::empirical(Vector(0), 2), InvalidArgument);
}

TEST_CASE("empirical spectra are sorted and clamped") {
  Vector ev(4);
  ev << 0.1, 2.0, -1e-12, 0.5;
  const KernelSpectrum s = KernelSpectrum::empirical(ev, 4);
  CHECK(s.eigenvalues(0) == 2.0);
  CHECK(s.eigenvalues(3) == 0.0);
  ev(2) = -0.5;
  CHECK_THROWS_AS(KernelSpectrum::empirical(ev, 4), InvalidArgument);
}

TEST_CASE("population spectrum lists multiplicities") {
  const KernelSpectrum s = KernelSpectrum::population(3, 2, 20);
  CHECK(s.eigenvalues.size() == 20);
  CHECK(s.eigenvalues(0) == 1.0);
  for (int i = 1; i <= 3; ++i) CHECK(s.eigenvalues(i) == doctest::Approx(1.0 / 3.0));
  for (int i = 4; i <= 8; ++i) CHECK(s.eigenvalues(i) == doctest::Approx(0.2));
  CHECK(s.eigenvalues.tail(11).isZero());
  for (double eps : {0.01, 0.3, 0.5, 2.0})
    CHECK(empirical_complexity(s, eps) == doctest::Approx(population_complexity(3, 2, 20, eps)).epsilon(1e-14));
}

TEST_CASE("population complexity closed forms") {
  CHECK(population_complexity(5, 2, 40, 1.5) == doctest::Approx(std::sqrt(3.0 / 40.0)));
  const double eps = 0.05;
  CHECK(population_complexity(4, 2, 100, eps) == doctest::Approx(eps * std::sqrt(14.0 / 100.0)));
  CHECK(population_complexity(7, 0, 4, 1.0) == doctest::Approx(0.5));
}

TEST_CASE("sub-root property on a grid") {
  const Matrix x = sample_sphere(150, 4, 3);
  const KernelSpectrum s = KernelSpectrum::empirical(gram_spectrum(normalized_gram(population_gram(x, x, 3), 150)), 150);
  const std::function<double(double)> curves[] = {
      [&](double e) { return empirical_complexity(s, e); },
      [](double e) { return population_complexity(4, 3, 150, e); }};
  for (const auto& complexity : curves) {
    double prev_r = 0.0, prev_ratio = INFINITY;
    for (int i = 0; i <= 60; ++i) {
      const double eps = 1e-3 * std::pow(10.0, i / 20.0);
      const double r = complexity(eps);
      CHECK(r >= prev_r);
      CHECK(r / eps <= prev_ratio * (1.0 + 1e-14));
      prev_r = r;
      prev_ratio = r / eps;
    }
  }
}

TEST_CASE("critical radius closed form and scaling") {
  auto pop = [](double sigma0) {
    return critical_radius([](double e) { return population_complexity(3, 2, 900, e); }, sigma0);
  };
  const double eps = pop(1.0);
  CHECK(std::abs(eps * eps - 0.01) <= 1e-10);
  CHECK(std::abs(population_complexity(3, 2, 900, eps) - eps * eps) <= 1e-12);
  const double eps2 = pop(2.0);
  CHECK(eps2 * eps2 / (eps * eps) == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(critical_radius([](double) { return 0.0; }, 1.0) == 0.0);
  CHECK_THROWS_AS(critical_radius([](double e) { return e; }, 0.0), InvalidArgument);
}

TEST_CASE("critical radius has a single sign change") {
  const Matrix x = sample_sphere(200, 3, 5);
  const KernelSpectrum s = KernelSpectrum::empirical(gram_spectrum(normalized_gram(population_gram(x, x, 2), 200)), 200);
  const double sigma0 = 0.7;
  const double root = critical_radius([&](double e) { return empirical_complexity(s, e); }, sigma0);
  CHECK(std::abs(sigma0 * empirical_complexity(s, root) - root * root) <= 1e-12 * std::max(1.0, root * root));
  int changes = 0;
  double prev = sigma0 * empirical_complexity(s, 1e-8) - 1e-16;
  for (int i = 1; i <= 400; ++i) {
    const double e = 1e-8 * std::pow(10.0, i * 8.5 / 400.0);
    const double g = sigma0 * empirical_complexity(s, e) - e * e;
    changes += (g > 0.0) != (prev > 0.0) ? 1 : 0;
    prev = g;
  }
  CHECK(changes == 1);
}

TEST_CASE("empirical and population critical radii agree up to a constant") {
  const std::size_t n = 2000;
  const double pop = critical_radius([&](double e) { return population_complexity(3, 2, n, e); }, 1.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix x = sample_sphere(n, 3, 1000 + seed);
    const KernelSpectrum s = KernelSpectrum::empirical(gram_spectrum(normalized_gram(population_gram(x, x, 2), n)), n);
    const double emp = critical_radius([&](double e) { return empirical_complexity(s, e); }, 1.0);
    const double ratio = emp * emp / (pop * pop);
    CHECK(ratio >= 1.0 / 3.0);
    CHECK(ratio <= 3.0);
  }
}

TEST_CASE("Monte Carlo risk") {
  const ZonalTarget t = make_target(3, 1, {1.0, 1.0}, 7);
  const RiskEstimate self =
      mc_risk(BatchPredictor([&](const Matrix& x) { return eval_target(t, x); }), t, 1000, 8);
  CHECK(self.estimate == 0.0);
  CHECK(self.std_error == 0.0);

  const RiskEstimate zero = mc_risk(PointPredictor([](const Vector&) { return 0.0; }), t, 1000000, 9);
  CHECK(std::abs(zero.estimate - 4.0 / 3.0) <= 5.0 * zero.std_error);

  const RiskEstimate again = mc_risk(PointPredictor([](const Vector&) { return 0.0; }), t, 1000000, 9);
  CHECK(again.estimate == zero.estimate);
  const RiskEstimate other = mc_risk(PointPredictor([](const Vector&) { return 0.0; }), t, 1000000, 10);
  CHECK(std::abs(other.estimate - zero.estimate) <= 3.0 * std::hypot(zero.std_error, other.std_error));
  CHECK_THROWS_AS(mc_risk(PointPredictor([](const Vector&) { return 0.0; }), t, 1, 9), InvalidArgument);
}

TEST_CASE("empirical loss") {
  const Vector f = Vector::LinSpaced(10, -1.0, 1.0);
  CHECK(empirical_loss(f, f) == 0.0);
  CHECK(empirical_loss(f + Vector::Ones(10), f) == doctest::Approx(1.0));
  CHECK_THROWS_AS(empirical_loss(f, Vector::Zero(3)), InvalidArgument);

  const ZonalTarget t = make_target(3, 1, {1.0, 1.0}, 11);
  const LabeledDataset data = gen_dataset(t, 40, 0.5, 12);
  const Vector pred = Vector::LinSpaced(40, 0.0, 1.0);
  const Vector w = data.y - data.f_star;
  CHECK(empirical_loss(pred, data.f_star) == doctest::Approx(((pred - data.y) + w).squaredNorm() / 40.0));
}

}  // TEST_SUITE
