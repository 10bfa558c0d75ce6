#include <doctest.h>

#include <cmath>

#include "gluekit/error.hpp"
#include "gluekit/synth.hpp"

using namespace gluekit;

TEST_CASE("spherical generator: unit pre-scaled points and shared structure") {
  SphericalSpec spec{5, 40, 3, 0.7, 60, 1e-2};
  RngStream rng(1);
  auto s = gen_isotropic_spherical(spec, rng);
  auto z = gen_isotropic_spherical({5, 40, 3, 0.7, 60, 0.0}, rng);
  CHECK(s.train.num_manifolds() == 5);
  CHECK(s.train.ambient_dim() == 60);
  for (std::size_t i = 0; i < 5; ++i) {
    const Matrix dev = z.train.manifold(i).points.rowwise() - z.centers.row(i);
    for (Eigen::Index k = 0; k < dev.rows(); ++k) CHECK(std::abs(dev.row(k).norm() / 0.7 - 1.0) <= 1e-12);
    // train and test differ only by noise
    const double gap = (s.train.manifold(i).points - s.test.manifold(i).points).norm();
    CHECK(gap > 0);
    CHECK(gap < 3 * 2e-2 * std::sqrt(40.0));
  }
}

TEST_CASE("spherical generator: deviation scales linearly with R") {
  RngStream rng(2);
  auto a = gen_isotropic_spherical({3, 10, 2, 1.0, 30, 0.0}, rng);
  auto b = gen_isotropic_spherical({3, 10, 2, 2.5, 30, 0.0}, rng);
  for (std::size_t i = 0; i < 3; ++i) {
    const Matrix da = a.train.manifold(i).points.rowwise() - a.centers.row(i);
    const Matrix db = b.train.manifold(i).points.rowwise() - b.centers.row(i);
    CHECK((2.5 * da - db).norm() <= 1e-12 * db.norm());
  }
}

TEST_CASE("spherical generator: centers nearly orthogonal in high dimension") {
  RngStream rng(3);
  auto s = gen_isotropic_spherical({20, 2, 2, 1.0, 1000, 1e-2}, rng);
  const Eigen::VectorXd n = s.centers.rowwise().norm();
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index j = i + 1; j < 20; ++j) CHECK(std::abs(s.centers.row(i).dot(s.centers.row(j)) / (n[i] * n[j])) <= 0.15);
}

TEST_CASE("spherical generator: cloud mean stays near the center") {
  const std::size_t D = 4;
  const double R = 1.0, eps = 1e-2;
  RngStream rng(4);
  auto s = gen_isotropic_spherical({3, 200, D, R, 200, eps}, rng);
  const double bound = R * 3 / std::sqrt(200.0 * D) * std::sqrt(double(D)) + eps * 3 / std::sqrt(200.0);
  for (std::size_t i = 0; i < 3; ++i) {
    const Eigen::RowVectorXd mean = s.train.manifold(i).points.colwise().mean();
    CHECK((mean - s.centers.row(i)).norm() <= bound);
  }
}

TEST_CASE("spherical generator rejects D > d") {
  RngStream rng(5);
  CHECK_THROWS_AS(gen_isotropic_spherical({2, 3, 10, 1.0, 5, 0.0}, rng), ConfigError);
}

TEST_CASE("gaussian clouds") {
  RngStream rng(6);
  auto g = gen_isotropic_gaussian(4, 100, 0.8, 1000, rng);
  double mean_dist = 0;
  for (std::size_t i = 0; i < 4; ++i)
    mean_dist += (g.train.manifold(i).points.rowwise() - g.centers.row(i)).rowwise().norm().mean();
  CHECK(std::abs(mean_dist / 4 / 0.8 - 1.0) <= 0.1);

  auto z = gen_isotropic_gaussian(3, 5, 0.0, 10, rng);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK((z.train.manifold(i).points.rowwise() - z.centers.row(i)).norm() == 0.0);

  auto a = gen_isotropic_gaussian(3, 5, 1.0, 10, RngStream(7, 0));
  auto b = gen_isotropic_gaussian(3, 5, 1.0, 10, RngStream(7, 0));
  auto c = gen_isotropic_gaussian(3, 5, 1.0, 10, RngStream(7, 1));
  CHECK(a.train.stacked() == b.train.stacked());
  CHECK(a.train.stacked() != c.train.stacked());
}

TEST_CASE("identity correlations reproduce the isotropic generator") {
  SphericalSpec spec{6, 7, 3, 0.9, 25, 1e-2};
  RngStream rng(8);
  auto a = gen_isotropic_spherical(spec, rng);
  auto b = apply_correlations(spec, {0.0, 0.0, 0.0}, rng);
  CHECK(a.train.stacked() == b.train.stacked());
  CHECK(a.test.stacked() == b.test.stacked());
}

TEST_CASE("center correlation matches the AR(1) target") {
  const std::size_t P = 5;
  const double rho = 0.6;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(P, P);
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    auto s = apply_correlations({P, 1, 1, 1.0, 100, 0.0}, {rho, 0.0, 0.0}, RngStream(100 + r));
    const Eigen::MatrixXd C = s.centers;
    const Eigen::VectorXd n = C.rowwise().norm();
    acc += (C * C.transpose()).cwiseQuotient(n * n.transpose());
  }
  acc /= reps;
  for (std::size_t i = 0; i < P; ++i)
    for (std::size_t j = 0; j < P; ++j)
      CHECK(std::abs(acc(i, j) - std::pow(rho, std::abs(double(i) - double(j)))) <= 0.1);
}

TEST_CASE("center-axis scaling spreads center norms") {
  std::vector<double> norms;
  for (int r = 0; r < 400; ++r) {
    auto s = apply_correlations({1, 1, 1, 1.0, 2000, 0.0}, {0.0, 0.0, 0.5}, RngStream(500 + r));
    norms.push_back(s.centers.row(0).norm());
  }
  double m = 0, v = 0;
  for (double x : norms) m += x;
  m /= norms.size();
  for (double x : norms) v += (x - m) * (x - m);
  v /= norms.size() - 1;
  CHECK(std::abs(std::sqrt(v) / m - 0.5) <= 0.1);
}

TEST_CASE("assign_labels") {
  RngStream a(9), b(9);
  CHECK(assign_labels(7, a) == assign_labels(7, b));
  RngStream rng(10);
  Vector mean = Vector::Zero(10);
  for (int k = 0; k < 100000; ++k) mean += assign_labels(10, rng);
  CHECK((mean / 100000.0).cwiseAbs().maxCoeff() <= 0.01);
}
