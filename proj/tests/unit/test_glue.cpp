#include <doctest.h>

#include <cmath>

#include "gluekit/error.hpp"
#include "gluekit/glue.hpp"
#include "gluekit/synth.hpp"

using namespace gluekit;

namespace {

ManifoldEnsemble unit_points(std::size_t P, std::size_t N, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<PointCloudManifold> ms;
  for (std::size_t i = 0; i < P; ++i) {
    Matrix x = sample_gaussian_matrix(1, N, 1.0, rng);
    x /= x.norm();
    ms.push_back({int(i), x});
  }
  return ManifoldEnsemble(std::move(ms));
}

// Squared distance from x to conv(rows of V) via NNLS on the lifted system.
double hull_distance(const Matrix& V, const Vector& x) {
  const double w = 1e4;
  Matrix A(V.rows(), V.cols() + 1);
  A.leftCols(V.cols()) = V;
  A.col(V.cols()).setConstant(w);
  Vector b(V.cols() + 1);
  b.head(V.cols()) = x;
  b[V.cols()] = w;
  const Vector mu = nnls(A, b, 1e-12).solution;
  return (V.transpose() * mu - x).norm();
}

}  // namespace

TEST_CASE("anchors of point manifolds are the signed points") {
  auto e = unit_points(6, 20, 1);
  RngStream rng(2);
  for (int k = 0; k < 10; ++k) {
    auto d = sample_anchor_draw(e, rng);
    CHECK(d.dual_mass.minCoeff() >= 0.0);
    for (std::size_t i = 0; i < 6; ++i) {
      if (!d.active[i]) continue;
      const Eigen::RowVectorXd expect = d.dichotomy.signs[i] * e.manifold(i).points.row(0);
      CHECK((d.anchors.row(i) - expect).norm() <= 1e-12);
    }
  }
}

TEST_CASE("anchors lie in the signed hull") {
  RngStream gen(3);
  std::vector<PointCloudManifold> ms;
  for (int i = 0; i < 3; ++i) ms.push_back({i, sample_gaussian_matrix(5, 20, 1.0, gen)});
  ManifoldEnsemble e(std::move(ms));
  RngStream rng(4);
  for (int k = 0; k < 10; ++k) {
    auto d = sample_anchor_draw(e, rng);
    for (std::size_t i = 0; i < 3; ++i) {
      if (!d.active[i]) continue;
      const Matrix signed_pts = d.dichotomy.signs[i] * e.manifold(i).points;
      CHECK(hull_distance(signed_pts, d.anchors.row(i).transpose()) <= 1e-8);
    }
  }
}

TEST_CASE("capacity equals the mean projected probe mass") {
  RngStream gen(5);
  std::vector<PointCloudManifold> ms;
  for (int i = 0; i < 4; ++i) ms.push_back({i, sample_gaussian_matrix(6, 15, 1.0, gen)});
  ManifoldEnsemble e(std::move(ms));
  AnchorSampler s(e);
  RngStream root(6);
  auto draws = s.draws(30, root);
  double mass = 0;
  for (std::size_t k = 0; k < draws.size(); ++k) {
    RngStream sub = root.substream(k);
    Vector t = sample_gaussian_probe(15, sub);
    Vector y = sample_dichotomy(4, sub).signs;
    Matrix G(e.total_points(), 15);
    for (std::size_t r = 0; r < e.total_points(); ++r) G.row(r) = y[e.row_owner()[r]] * e.stacked().row(r);
    auto sol = project_to_polar_cone({t, G, e.row_owner()});
    mass += sol.cone_proj.squaredNorm();
  }
  const double alpha = 4.0 / (mass / draws.size());
  CHECK(capacity_from_draws(draws).value == doctest::Approx(alpha).epsilon(1e-6));
}

TEST_CASE("capacity of random points is two") {
  auto e = unit_points(24, 400, 7);
  auto est = estimate_capacity(e, 400, RngStream(8));
  CHECK(std::abs(est.value - 2.0) <= 0.2);
  CHECK(est.std_err > 0);
}

TEST_CASE("tiny spheres behave like points") {
  RngStream rng(9);
  auto pts = gen_isotropic_spherical({24, 1, 1, 1e-9, 400, 0.0}, rng).train;
  auto sph = gen_isotropic_spherical({24, 10, 2, 1e-3, 400, 0.0}, rng).train;
  const double a = estimate_capacity(pts, 300, RngStream(10)).value;
  const double b = estimate_capacity(sph, 300, RngStream(10)).value;
  CHECK(std::abs(a - b) / a <= 0.05);
}

TEST_CASE("point manifolds are flagged degenerate") {
  auto e = unit_points(8, 50, 11);
  auto rep = estimate_geometry(e, {50, kDefaultQpTol, 1, false}, RngStream(12));
  CHECK(rep.degenerate);
  CHECK(rep.dimension.value == 0.0);
  CHECK(rep.radius.value == 0.0);
  CHECK_THROWS_AS(capacity_from_geometry(rep.dimension.value, rep.radius.value), NumericalError);
}

TEST_CASE("capacity_from_geometry") {
  CHECK(capacity_from_geometry(2.0, 1.0) == doctest::Approx(1.0));
  CHECK(capacity_from_geometry(4.0, 1e8) == doctest::Approx(0.25));
}

TEST_CASE("geometry is deterministic and thread-count independent") {
  auto e = gen_isotropic_spherical({6, 20, 3, 1.0, 80, 1e-2}, RngStream(13)).train;
  GlueOptions o{40, kDefaultQpTol, 1, false};
  auto a = estimate_geometry(e, o, RngStream(14));
  auto b = estimate_geometry(e, o, RngStream(14));
  o.threads = 4;
  auto c = estimate_geometry(e, o, RngStream(14));
  for (const auto* r : {&b, &c}) {
    CHECK(a.capacity.value == r->capacity.value);
    CHECK(a.dimension.value == r->dimension.value);
    CHECK(a.radius.value == r->radius.value);
    CHECK(a.center_align.value == r->center_align.value);
    CHECK(a.axis_align.value == r->axis_align.value);
    CHECK(a.center_axis_align.value == r->center_axis_align.value);
  }
}

TEST_CASE("orthogonal manifolds have small alignments") {
  // centers and axes along distinct coordinate directions
  const std::size_t P = 4, D = 3, N = 200, M = 30;
  RngStream rng(15);
  std::vector<PointCloudManifold> ms;
  std::size_t next = 0;
  for (std::size_t i = 0; i < P; ++i) {
    Matrix pts = Matrix::Zero(M, N);
    const std::size_t c = next++;
    std::vector<std::size_t> ax;
    for (std::size_t j = 0; j < D; ++j) ax.push_back(next++);
    for (std::size_t k = 0; k < M; ++k) {
      pts(k, c) = 1.0;
      for (std::size_t j = 0; j < D; ++j) pts(k, ax[j]) = 0.5 * rng.normal();
    }
    ms.push_back({int(i), pts});
  }
  ManifoldEnsemble e(std::move(ms));
  auto rep = estimate_geometry(e, {100, kDefaultQpTol, 1, false}, RngStream(16));
  CHECK(std::abs(rep.center_align.value) <= 0.1);
  CHECK(std::abs(rep.axis_align.value) <= 0.1);
  CHECK(std::abs(rep.center_axis_align.value) <= 0.1);
}

TEST_CASE("permuting manifolds leaves scalars unchanged") {
  auto e = gen_isotropic_spherical({5, 10, 2, 0.8, 40, 1e-2}, RngStream(17)).train;
  std::vector<PointCloudManifold> ms = e.manifolds();
  std::reverse(ms.begin(), ms.end());
  ManifoldEnsemble r(std::move(ms));
  // matched draws: reversed dichotomy, same probe
  AnchorSampler sa(e), sr(r);
  RngStream root(18);
  auto da = sa.draws(20, root);
  std::vector<AnchorDraw> dr;
  for (const auto& d : da) {
    AnchorDraw x;
    x.probe = d.probe;
    x.dichotomy.signs = d.dichotomy.signs.reverse();
    x.anchors = d.anchors.colwise().reverse();
    x.dual_mass = d.dual_mass.reverse();
    x.active.assign(d.active.rbegin(), d.active.rend());
    dr.push_back(x);
  }
  auto a = analyze_draws(e, da), b = analyze_draws(r, dr);
  CHECK(a.capacity.value == doctest::Approx(b.capacity.value).epsilon(1e-12));
  CHECK(a.dimension.value == doctest::Approx(b.dimension.value).epsilon(1e-10));
  CHECK(a.radius.value == doctest::Approx(b.radius.value).epsilon(1e-10));
  CHECK(a.center_align.value == doctest::Approx(b.center_align.value).epsilon(1e-12));
  CHECK(a.axis_align.value == doctest::Approx(b.axis_align.value).epsilon(1e-12));
  CHECK(a.center_axis_align.value == doctest::Approx(b.center_axis_align.value).epsilon(1e-12));
}
