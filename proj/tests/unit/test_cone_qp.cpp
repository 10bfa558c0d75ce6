#include <doctest.h>

#include <cmath>
#include <limits>

#include "gluekit/cone_qp.hpp"
#include "gluekit/error.hpp"

using namespace gluekit;

namespace {

Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Minimum of |b - A^T l|^2 over l >= 0 by trying every support set.
double brute_force_nnls(const Matrix& A, const Vector& b) {
  const int K = static_cast<int>(A.rows());
  double best = b.squaredNorm();
  for (int mask = 1; mask < (1 << K); ++mask) {
    std::vector<int> idx;
    for (int k = 0; k < K; ++k)
      if (mask >> k & 1) idx.push_back(k);
    Eigen::MatrixXd As(idx.size(), A.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) As.row(i) = A.row(idx[i]);
    Eigen::VectorXd z = As.transpose().colPivHouseholderQr().solve(b);
    if ((z.array() < -1e-12).any()) continue;
    best = std::min(best, (b - As.transpose() * z).squaredNorm());
  }
  return best;
}

void check_kkt(const Matrix& G, const Vector& t, const ConeProjectionSolution& s, double tol) {
  const double scale = 1.0 + t.norm();
  CHECK(std::abs(s.x_star.dot(s.cone_proj)) <= tol * scale * scale);
  CHECK(std::abs(t.squaredNorm() - s.x_star.squaredNorm() - s.cone_proj.squaredNorm()) <= tol * scale * scale);
  CHECK((s.x_star - (t - G.transpose() * s.dual)).norm() <= tol * scale);
  CHECK(s.dual.minCoeff() >= 0.0);
  const Vector slack = G * s.x_star;
  const Vector norms = G.rowwise().norm();
  for (Eigen::Index k = 0; k < G.rows(); ++k) {
    CHECK(slack[k] <= tol * scale * norms[k]);
    CHECK(std::abs(s.dual[k] * slack[k]) <= tol * scale * scale);
  }
}

}  // namespace

TEST_CASE("cone projection: probe inside the cone") {
  auto s = project_to_polar_cone({vec({1, 0}), rows({{1, 0}}), {0}});
  CHECK(s.cone_proj.isApprox(vec({1, 0})));
  CHECK(s.x_star.norm() < 1e-12);
  CHECK(s.dual[0] == doctest::Approx(1.0));
}

TEST_CASE("cone projection: probe inside the polar cone") {
  auto s = project_to_polar_cone({vec({-1, 0}), rows({{1, 0}}), {0}});
  CHECK(s.cone_proj.norm() < 1e-12);
  CHECK(s.x_star.isApprox(vec({-1, 0})));
  CHECK(s.dual[0] == 0.0);
  CHECK(s.active_set.empty());
}

TEST_CASE("cone projection: oblique probe") {
  auto s = project_to_polar_cone({vec({1, 1}), rows({{1, 0}}), {0}});
  CHECK(s.cone_proj.isApprox(vec({1, 0})));
  CHECK(s.x_star.isApprox(vec({0, 1})));
  CHECK(s.cone_proj.squaredNorm() == doctest::Approx(1.0));
}

TEST_CASE("cone projection rejects zero rows") {
  CHECK_THROWS_AS(project_to_polar_cone({vec({1, 1}), rows({{1, 0}, {0, 0}}), {0, 1}}), DataError);
}

TEST_CASE("nnls clamps at zero") {
  Matrix I = Matrix::Identity(2, 2);
  auto l = nnls(I, vec({1, -1})).solution;
  CHECK(l[0] == doctest::Approx(1.0));
  CHECK(l[1] == 0.0);
}

TEST_CASE("nnls recovers a feasible target") {
  RngStream rng(1);
  Matrix A = sample_gaussian_matrix(6, 10, 1.0, rng);
  Vector l0(6);
  l0 << 0.5, 0, 1.2, 0, 0.3, 2.0;
  Vector b = A.transpose() * l0;
  auto l = nnls(A, b).solution;
  CHECK((b - A.transpose() * l).norm() <= 1e-8 * b.norm());
}

TEST_CASE("nnls matches exhaustive enumeration") {
  RngStream rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const int K = 3 + trial % 6, N = 2 + trial % 7;
    Matrix A = sample_gaussian_matrix(K, N, 1.0, rng);
    Vector b = sample_gaussian_probe(N, rng);
    auto l = nnls(A, b).solution;
    CHECK(l.minCoeff() >= 0.0);
    const double obj = (b - A.transpose() * l).squaredNorm();
    CHECK(obj == doctest::Approx(brute_force_nnls(A, b)).epsilon(1e-8).scale(1.0));
  }
}

TEST_CASE("nnls handles duplicated rows") {
  Matrix A = rows({{1, 0}, {1, 0}, {0, 1}, {1, 0}});
  auto l = nnls(A, vec({2, 3})).solution;
  CHECK((A.transpose() * l - vec({2, 3})).norm() < 1e-10);
}

TEST_CASE("gram form agrees with the dense form") {
  RngStream rng(3);
  Matrix A = sample_gaussian_matrix(30, 12, 1.0, rng);
  Vector b = sample_gaussian_probe(12, rng);
  Matrix H = A * A.transpose();
  Vector c = A * b;
  auto l1 = nnls(A, b).solution;
  auto l2 = nnls_gram(H, c, A.rowwise().norm().maxCoeff() * b.norm()).solution;
  CHECK((A.transpose() * (l1 - l2)).norm() <= 1e-8 * b.norm());
}

TEST_CASE("cone projection satisfies KKT on random instances") {
  RngStream rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const int K = 1 + static_cast<int>(rng.uniform() * 60), N = 1 + static_cast<int>(rng.uniform() * 100);
    ConeProjectionProblem p{sample_gaussian_probe(N, rng), sample_gaussian_matrix(K, N, 1.0, rng), {}};
    auto s = project_to_polar_cone(p);
    check_kkt(p.signed_points, p.probe, s, 1e-6);
  }
}

TEST_CASE("row scaling leaves the projection unchanged") {
  RngStream rng(5);
  Matrix G = sample_gaussian_matrix(15, 8, 1.0, rng);
  Vector t = sample_gaussian_probe(8, rng);
  auto s1 = project_to_polar_cone({t, G, {}});
  G.row(3) *= 7.5;
  G.row(9) *= 0.01;
  auto s2 = project_to_polar_cone({t, G, {}});
  CHECK((s1.cone_proj - s2.cone_proj).norm() <= 1e-8 * t.norm());
}

TEST_CASE("strict separability") {
  auto a = strictly_separable(rows({{1, 0}, {0, 1}}));
  REQUIRE(a.separable);
  CHECK((rows({{1, 0}, {0, 1}}) * a.witness).minCoeff() > 0);

  auto b = strictly_separable(rows({{1, 0}, {-1, 0}}));
  CHECK_FALSE(b.separable);
  CHECK(b.certificate[0] == doctest::Approx(0.5));
  CHECK(b.certificate[1] == doctest::Approx(0.5));

  CHECK_FALSE(strictly_separable(rows({{1, 0}, {0, 0}})).separable);

  RngStream rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int N = 5 + trial % 20;
    const int K = 1 + static_cast<int>(rng.uniform() * N);
    Matrix G = sample_gaussian_matrix(K, N, 1.0, rng);
    auto r = strictly_separable(G);
    REQUIRE(r.separable);
    CHECK((G * r.witness).minCoeff() > 0);
  }
}

TEST_CASE("non-separable certificates are convex and tight") {
  RngStream rng(7);
  int nonsep = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix G = sample_gaussian_matrix(12, 4, 1.0, rng);
    auto r = strictly_separable(G);
    if (r.separable) {
      CHECK((G * r.witness).minCoeff() > 0);
      // removing rows keeps separability
      CHECK(strictly_separable(G.topRows(6)).separable);
    } else {
      ++nonsep;
      CHECK(r.certificate.minCoeff() >= 0);
      CHECK(r.certificate.sum() == doctest::Approx(1.0));
      CHECK((G.transpose() * r.certificate).norm() <= 1e-10 * G.rowwise().norm().maxCoeff());
    }
  }
  CHECK(nonsep > 50);
}
