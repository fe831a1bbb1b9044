#include "oracles.hpp"

#include "sphattn/kernel_engine.hpp"
#include "sphattn/target_synth.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace sphattn;

TEST_SUITE("target_synth") {

TEST_CASE("constant and linear targets") {
  const ZonalTarget c = make_target(5, 0, {1.0}, 1);
  const Matrix x = sample_sphere(20, 5, 2);
  CHECK(eval_target(c, x).isApproxToConstant(1.0));

  const ZonalTarget lin = make_target(3, 1, {0.0, 1.0}, 3);
  const Vector w = lin.terms[1].direction;
  CHECK(std::abs(w.norm() - 1.0) <= 1e-12);
  const Vector f = eval_target(lin, sample_sphere(20, 3, 4));
  CHECK(f.isApprox(sample_sphere(20, 3, 4) * w));

  Matrix at_w(1, 3);
  at_w.row(0) = w.transpose();
  CHECK(eval_target(lin, at_w)(0) == doctest::Approx(1.0));
  Vector perp(3);
  perp << -w(1), w(0), 0.0;
  perp.normalize();
  Matrix at_perp(1, 3);
  at_perp.row(0) = perp.transpose();
  CHECK(std::abs(eval_target(lin, at_perp)(0)) <= 1e-15);
}

TEST_CASE("degree-two target at the antipode") {
  const ZonalTarget t = make_target(3, 2, {0.0, 0.0, 1.0}, 5);
  Matrix x(1, 3);
  x.row(0) = -t.terms[2].direction.transpose();
  CHECK(eval_target(t, x)(0) == doctest::Approx(oracle::legendre(2, -1.0)));
}

TEST_CASE("make_target rejects bad input") {
  CHECK_THROWS_AS(make_target(3, 1, {1.0, 0.0}, 1), InvalidArgument);
  CHECK_THROWS_AS(make_target(3, 1, {1.0}, 1), InvalidArgument);
  CHECK_THROWS_AS(make_target(3, 1, {1.0, 1.0}, 1, 0), InvalidArgument);
}

TEST_CASE("norms in closed form") {
  CHECK(rkhs_norm(ZonalTarget{3, 0, {0.0}, {{0, 0.0, Vector::Unit(3, 0)}}}) == 0.0);
  CHECK(rkhs_norm(make_target(4, 1, {3.0, 4.0}, 1)) == doctest::Approx(5.0));
  for (int d : {3, 6, 11}) CHECK(rkhs_norm(make_target(d, 1, {1.0, 1.0}, 7)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(l2_norm_sq(make_target(8, 0, {1.0}, 1)) == doctest::Approx(1.0));
  CHECK(l2_norm_sq(make_target(3, 1, {1.0, 1.0}, 1)) == doctest::Approx(4.0 / 3.0));
  CHECK(l2_norm_sq(make_target(2, 2, {0.0, 0.0, 1.0}, 1)) == doctest::Approx(0.5));
}

TEST_CASE("RKHS norm dominates the L2 norm") {
  const ZonalTarget t = make_target(5, 2, {0.3, 0.0, 1.2}, 9);
  CHECK(rkhs_norm(t) * rkhs_norm(t) > l2_norm_sq(t));
  const ZonalTarget c = make_target(5, 0, {2.0}, 9);
  CHECK(rkhs_norm(c) * rkhs_norm(c) == doctest::Approx(l2_norm_sq(c)));
}

TEST_CASE("Monte Carlo L2 norm and mean-zero zonal terms") {
  const std::size_t draws = 1000000;
  const ZonalTarget t = make_target(3, 1, {1.0, 1.0}, 21);
  const Matrix x = sample_sphere(draws, 3, 22);
  const Vector f = eval_target(t, x);
  const Vector f2 = f.array().square().matrix();
  const double mean = f2.mean();
  const double se = std::sqrt((f2.array() - mean).square().sum() / (draws - 1.0) / draws);
  CHECK(std::abs(mean - 4.0 / 3.0) <= 5.0 * se);

  const ZonalTarget p2 = make_target(3, 2, {0.0, 0.0, 1.0}, 23);
  const Vector g = eval_target(p2, x);
  const double gm = g.mean();
  const double gse = std::sqrt((g.array() - gm).square().sum() / (draws - 1.0) / draws);
  CHECK(std::abs(gm) <= 5.0 * gse);
}

TEST_CASE("multi-direction targets spread the coefficient") {
  const ZonalTarget t = make_target(6, 1, {0.5, 2.0}, 31, 4);
  CHECK(t.terms.size() == 8);
  for (const ZonalTerm& term : t.terms) CHECK(std::abs(term.coeff) == doctest::Approx(term.degree ? 1.0 : 0.25));
}

TEST_CASE("gen_dataset") {
  const ZonalTarget t = make_target(4, 2, {1.0, 1.0, 1.0}, 1);
  const LabeledDataset clean = gen_dataset(t, 100, 0.0, 2);
  CHECK(clean.y == clean.f_star);
  CHECK(clean.f_star.isApprox(eval_target(t, clean.s)));

  const LabeledDataset noisy = gen_dataset(t, 10000, 1.0, 3);
  const Vector w = noisy.y - noisy.f_star;
  const double sd = std::sqrt((w.array() - w.mean()).square().sum() / (w.size() - 1.0));
  CHECK(sd >= 0.95);
  CHECK(sd <= 1.05);
  CHECK(std::abs(w.mean()) <= 5.0 / 100.0);

  const LabeledDataset again = gen_dataset(t, 10000, 1.0, 3);
  CHECK(again.s == noisy.s);
  CHECK(again.y == noisy.y);
  CHECK_THROWS_AS(gen_dataset(t, 0, 1.0, 3), InvalidArgument);
  CHECK_THROWS_AS(gen_dataset(t, 10, -1.0, 3), InvalidArgument);
}

TEST_CASE("target lies in the column space of the population gram") {
  const ZonalTarget t = make_target(3, 2, {0.5, -1.0, 2.0}, 4);
  const LabeledDataset data = gen_dataset(t, 300, 0.0, 5);
  const Matrix k = population_gram(data.s, data.s, 2);
  const GramEigen eig = gram_eigen(k);
  const Matrix top = eig.vectors.leftCols(9);
  const Vector resid = data.f_star - top * (top.transpose() * data.f_star);
  CHECK(resid.norm() <= 1e-6 * data.f_star.norm());
}

TEST_CASE("CSV and metadata round trip") {
  const ZonalTarget t = make_target(3, 1, {1.0, -2.0}, 6);
  const LabeledDataset data = gen_dataset(t, 25, 0.3, 7);
  const auto dir = std::filesystem::temp_directory_path() / "sphattn_target_test";
  std::filesystem::create_directories(dir);
  write_dataset_csv(dir / "data.csv", data);
  std::ifstream in(dir / "data.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "x_0,x_1,x_2,f_star,y");
  const LabeledDataset back = read_dataset_csv(dir / "data.csv", 0.3);
  CHECK(back.s == data.s);
  CHECK(back.y == data.y);
  CHECK(back.f_star == data.f_star);

  write_dataset_metadata(dir / "meta.json", t, 0.3, 7);
  std::ifstream meta(dir / "meta.json");
  const std::string text((std::istreambuf_iterator<char>(meta)), std::istreambuf_iterator<char>());
  for (const char* key : {"\"d\"", "\"ell0\"", "\"coeffs\"", "\"directions\"", "\"sigma0\"", "\"seed\""})
    CHECK(text.find(key) != std::string::npos);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
