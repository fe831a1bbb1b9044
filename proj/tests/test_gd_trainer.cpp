#include "sphattn/gd_trainer.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace sphattn;

namespace {

struct Problem {
  LabeledDataset data;
  FirstLayerDirections q;
  AttentionWeights tau;
  Matrix k_n;
};

Problem make_problem(int d, int ell0, std::size_t n, std::size_t m, double sigma0, std::uint64_t seed) {
  std::vector<double> coeffs(static_cast<std::size_t>(ell0) + 1, 1.0);
  const ZonalTarget t = make_target(d, ell0, coeffs, seed);
  LabeledDataset data = gen_dataset(t, n, sigma0, seed + 1);
  auto q = FirstLayerDirections::sample(m, d, seed + 2);
  const AttentionWeights tau = AttentionWeights::oracle(d, ell0);
  Matrix k_n = normalized_gram(empirical_gram(data.s, data.s, q, tau), n);
  return {std::move(data), std::move(q), tau, std::move(k_n)};
}

TrainOptions opts(double eta, std::size_t steps, FeatureBackend backend = FeatureBackend::kDense) {
  TrainOptions o;
  o.eta = eta;
  o.steps = steps;
  o.backend = backend;
  return o;
}

}  // namespace

TEST_SUITE("gd_trainer") {

TEST_CASE("feature matrix basics") {
  const Matrix x = sample_sphere(5, 3, 1);
  const auto q = FirstLayerDirections::sample(4, 3, 2);
  CHECK(feature_matrix(x, q, AttentionWeights::zeros(2)).isZero());
  const auto q1 = FirstLayerDirections::sample(1, 3, 3);
  const AttentionWeights tau = AttentionWeights::oracle(3, 2);
  const Matrix z = feature_matrix(x, q1, tau);
  for (Eigen::Index i = 0; i < 5; ++i)
    CHECK(z(0, i) == doctest::Approx(activation(x.row(i).transpose(), q1.matrix().row(0).transpose(), tau, 3)));
  CHECK_THROWS_AS(feature_matrix(sample_sphere(5, 4, 1), q, tau), InvalidArgument);
}

TEST_CASE("predict is linear and zero at a = 0") {
  const Matrix x = sample_sphere(30, 4, 4);
  const auto q = FirstLayerDirections::sample(50, 4, 5);
  const AttentionWeights tau = AttentionWeights::oracle(4, 1);
  CHECK(predict(Vector::Zero(50), x, q, tau).isZero());
  const Vector a = Vector::LinSpaced(50, -1.0, 1.0);
  const Vector b = Vector::LinSpaced(50, 2.0, 0.5);
  CHECK(predict(a + b, x, q, tau).isApprox(predict(a, x, q, tau) + predict(b, x, q, tau), 1e-13));
  CHECK(predict(a, x, q, tau).isApprox(feature_matrix(x, q, tau).transpose() * a, 1e-13));
}

TEST_CASE("first step and zero responses") {
  const Problem p = make_problem(4, 1, 60, 80, 0.1, 10);
  const TrainResult r = train(p.data, p.q, p.tau, opts(0.3, 1));
  const Matrix z = feature_matrix(p.data.s, p.q, p.tau);
  CHECK(r.state.weights().isApprox(0.3 / 60.0 * z * p.data.y, 1e-13));
  CHECK(r.trace.loss.size() == 2);
  CHECK(r.trace.loss[0] == doctest::Approx(p.data.y.squaredNorm() / 120.0));

  LabeledDataset zero = p.data;
  zero.y.setZero();
  const TrainResult rz = train(zero, p.q, p.tau, opts(0.3, 20));
  CHECK(rz.state.weights().isZero());
  CHECK_THROWS_AS(train(p.data, p.q, p.tau, opts(0.3, 0)), InvalidArgument);
  CHECK_THROWS_AS(train(p.data, p.q, p.tau, opts(0.0, 1)), InvalidArgument);
}

TEST_CASE("residual follows the linear recursion exactly") {
  const Problem p = make_problem(4, 2, 200, 2000, 0.3, 20);
  const double eta = 0.1;
  auto o = opts(eta, 200);
  o.keep_snapshots = true;
  const TrainResult r = train(p.data, p.q, p.tau, o);
  const double ynorm = p.data.y.norm();
  // Reference by repeated multiplication in the test itself.
  Vector u = -p.data.y;
  for (std::size_t t = 0; t <= 200; ++t) {
    const Vector resid = predict(r.trace.snapshots[t], p.data.s, p.q, p.tau) - p.data.y;
    REQUIRE((resid - u).norm() <= 1e-8 * ynorm);
    u = u - eta * (p.k_n * u);
  }
  CHECK((closed_form_residual(p.k_n, p.data.y, eta, 200) + p.data.y - r.state.y_hat).norm() <= 1e-8 * ynorm);
}

TEST_CASE("closed form: trivial cases, both evaluations agree") {
  const Problem p = make_problem(3, 1, 80, 300, 0.2, 30);
  CHECK(closed_form_residual(p.k_n, p.data.y, 0.5, 0) == -p.data.y);
  CHECK(closed_form_residual(p.k_n, p.data.y, 0.0, 37) == -p.data.y);
  const Vector power = closed_form_residual_power(p.k_n, p.data.y, 0.5, 500);
  const Vector spectral = closed_form_residual_spectral(p.k_n, p.data.y, 0.5, 500);
  CHECK((power - spectral).norm() <= 1e-10 * p.data.y.norm());
  Matrix asym = p.k_n;
  asym(0, 1) += 1e-3;
  CHECK_THROWS_AS(closed_form_residual(asym, p.data.y, 0.5, 3), InvalidArgument);
}

TEST_CASE("spectral loss formula") {
  const Problem p = make_problem(4, 1, 150, 600, 0.3, 40);
  const double eta = 0.4;
  const TrainResult r = train(p.data, p.q, p.tau, opts(eta, 60));
  const GramEigen eig = gram_eigen(p.k_n);
  const Vector proj = eig.vectors.transpose() * p.data.y;
  const double n = 150.0;
  for (std::size_t t : {0, 1, 7, 30, 60}) {
    double expected = 0.0;
    for (Eigen::Index i = 0; i < proj.size(); ++i)
      expected += std::pow(1.0 - eta * eig.values(i), 2.0 * static_cast<double>(t)) * proj(i) * proj(i);
    expected /= n;
    // the trace stores (1/2n)||u||^2
    CHECK(2.0 * r.trace.loss[t] == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("loss is monotone for a stable step size") {
  const Problem p = make_problem(5, 2, 120, 500, 0.5, 50);
  const double lmax = gram_spectrum(p.k_n)(0);
  const TrainResult r = train(p.data, p.q, p.tau, opts(0.9 / lmax, 100));
  for (std::size_t t = 1; t < r.trace.loss.size(); ++t) CHECK(r.trace.loss[t] <= r.trace.loss[t - 1]);
}

TEST_CASE("noiseless training drives the loss to zero") {
  const Problem p = make_problem(3, 1, 100, 400, 0.0, 60);
  const TrainResult r = train(p.data, p.q, p.tau, opts(0.5, 3000));
  CHECK(r.trace.loss.back() <= 1e-12);
  CHECK(r.trace.clean_loss.back() <= 1e-12);
}

TEST_CASE("training-set predictions equal the tracked outputs") {
  const Problem p = make_problem(4, 1, 90, 300, 0.2, 70);
  const TrainResult r = train(p.data, p.q, p.tau, opts(0.5, 25));
  CHECK(predict(r.state.weights(), p.data.s, p.q, p.tau).isApprox(r.state.y_hat, 1e-12));
}

TEST_CASE("compressed features reproduce dense training") {
  const Problem p = make_problem(5, 1, 300, 900, 0.3, 80);
  const TrainResult dense = train(p.data, p.q, p.tau, opts(0.5, 80, FeatureBackend::kDense));
  auto o = opts(0.5, 80, FeatureBackend::kCompressed);
  o.sketch_seed = 123;
  const TrainResult comp = train(p.data, p.q, p.tau, o);
  CHECK_FALSE(comp.state.features->dense());
  CHECK(comp.state.features->reduced.rows() == 6);
  CHECK((comp.state.y_hat - dense.state.y_hat).norm() <= 1e-9 * p.data.y.norm());
  CHECK((comp.state.weights() - dense.state.weights()).norm() <= 1e-9 * dense.state.weights().norm());
  for (std::size_t t = 0; t < dense.trace.loss.size(); ++t)
    CHECK(comp.trace.loss[t] == doctest::Approx(dense.trace.loss[t]).epsilon(1e-9));
}

TEST_CASE("compressed features with zero weights") {
  const Problem p = make_problem(3, 1, 40, 50, 0.1, 90);
  const FeatureFactor f = compressed_features(p.data.s, p.q, AttentionWeights::zeros(1), 1);
  CHECK(f.reduced.rows() == 0);
  CHECK(f.lift->cols() == 0);
}

TEST_CASE("divergence is detected") {
  const Problem p = make_problem(3, 1, 50, 200, 0.1, 100);
  CHECK_THROWS_AS(train(p.data, p.q, p.tau, opts(50.0, 200)), NumericalFailure);
}

TEST_CASE("checkpoints keep the requested weights") {
  const Problem p = make_problem(3, 1, 50, 100, 0.1, 110);
  auto o = opts(0.5, 30);
  o.checkpoints = {5, 30, 99};
  const TrainResult r = train(p.data, p.q, p.tau, o);
  REQUIRE(r.trace.snapshot_steps == std::vector<std::size_t>{5, 30});
  CHECK(r.trace.snapshots[1] == r.state.weights());
}

TEST_CASE("trace CSV") {
  const Problem p = make_problem(3, 1, 30, 60, 0.1, 120);
  const TrainResult r = train(p.data, p.q, p.tau, opts(0.5, 4));
  const auto path = std::filesystem::temp_directory_path() / "sphattn_trace_test.csv";
  write_trace_csv(path.string(), r.trace);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,loss,residual_norm");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 5);
  std::filesystem::remove(path);
}

TEST_CASE("population kernel perturbation bound") {
  const Problem p = make_problem(4, 1, 100, 3000, 0.2, 130);
  const Matrix k_pop = normalized_gram(population_gram(p.data.s, p.data.s, 1), 100);
  const double eta = 0.5;
  const double gap = (p.k_n - k_pop).norm();
  for (std::size_t t : {1, 10, 50}) {
    const Vector diff = closed_form_residual(p.k_n, p.data.y, eta, t) - closed_form_residual(k_pop, p.data.y, eta, t);
    CHECK(diff.norm() <= static_cast<double>(t) * eta * gap * p.data.y.norm() + 1e-12);
  }
}

}  // TEST_SUITE
