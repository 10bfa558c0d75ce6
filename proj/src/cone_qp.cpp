#include "gluekit/cone_qp.hpp"

#include <cmath>
#include <string>

#include "active_set.hpp"
#include "gluekit/error.hpp"

namespace gluekit {
namespace {

class DenseRows {
 public:
  DenseRows(const Matrix& A, const Vector& b) : A_(A), b_(b), c_(A * b) {
    scale_ = A.rowwise().norm().maxCoeff() * b.norm();
  }
  std::size_t size() const { return static_cast<std::size_t>(A_.rows()); }
  double gram(std::size_t i, std::size_t j) const { return A_.row(i).dot(A_.row(j)); }
  double rhs(std::size_t k) const { return c_[k]; }
  double scale() const { return scale_; }
  void gradient(const Vector& x, const std::vector<std::size_t>& passive, Vector& w) const {
    Vector r = b_;
    for (std::size_t k : passive) r.noalias() -= x[k] * A_.row(k).transpose();
    w.noalias() = A_ * r;
  }

 private:
  const Matrix& A_;
  const Vector& b_;
  Vector c_;
  double scale_ = 0;
};

class GramForm {
 public:
  GramForm(const Matrix& H, const Vector& c, double scale) : H_(H), c_(c), scale_(scale) {}
  std::size_t size() const { return static_cast<std::size_t>(c_.size()); }
  double gram(std::size_t i, std::size_t j) const { return H_(i, j); }
  double rhs(std::size_t k) const { return c_[k]; }
  double scale() const { return scale_; }
  void gradient(const Vector& x, const std::vector<std::size_t>& passive, Vector& w) const {
    w = c_;
    for (std::size_t k : passive) w.noalias() -= x[k] * H_.row(k).transpose();
  }

 private:
  const Matrix& H_;
  const Vector& c_;
  double scale_;
};

class SignedGram {
 public:
  SignedGram(const Matrix& H, const Vector& sign, const Vector& c, double scale)
      : H_(H), sign_(sign), c_(c), scale_(scale) {}
  std::size_t size() const { return static_cast<std::size_t>(c_.size()); }
  double gram(std::size_t i, std::size_t j) const { return sign_[i] * sign_[j] * H_(i, j); }
  double rhs(std::size_t k) const { return c_[k]; }
  double scale() const { return scale_; }
  void gradient(const Vector& x, const std::vector<std::size_t>& passive, Vector& w) const {
    Vector u = Vector::Zero(c_.size());
    for (std::size_t k : passive) u.noalias() += (x[k] * sign_[k]) * H_.row(k).transpose();
    w = c_ - sign_.cwiseProduct(u);
  }

 private:
  const Matrix& H_;
  const Vector& sign_;
  const Vector& c_;
  double scale_;
};

}  // namespace

NnlsResult nnls(const Matrix& A, const Vector& b, double tol) {
  if (A.cols() != b.size()) throw DataError("nnls: A has " + std::to_string(A.cols()) + " columns, b has " + std::to_string(b.size()));
  DenseRows be(A, b);
  auto res = detail::solve_active_set(be, tol);
  return {std::move(res.x), res.iterations};
}

NnlsResult nnls_gram(const Matrix& H, const Vector& c, double scale, double tol) {
  if (H.rows() != c.size() || H.cols() != c.size()) throw DataError("nnls_gram: shape mismatch");
  GramForm be(H, c, scale);
  auto res = detail::solve_active_set(be, tol);
  return {std::move(res.x), res.iterations};
}

NnlsResult nnls_signed_gram(const Matrix& point_gram, const Vector& row_sign, const Vector& c, double scale,
                            double tol) {
  if (point_gram.rows() != c.size() || point_gram.cols() != c.size() || row_sign.size() != c.size())
    throw DataError("nnls_signed_gram: shape mismatch");
  SignedGram be(point_gram, row_sign, c, scale);
  auto res = detail::solve_active_set(be, tol);
  return {std::move(res.x), res.iterations};
}

ConeProjectionSolution solution_from_dual(const Matrix& signed_points, const Vector& probe, Vector dual,
                                          std::size_t iterations) {
  ConeProjectionSolution sol;
  sol.cone_proj = signed_points.transpose() * dual;
  sol.x_star = probe - sol.cone_proj;
  for (Eigen::Index k = 0; k < dual.size(); ++k)
    if (dual[k] > 0) sol.active_set.push_back(static_cast<int>(k));
  sol.dual = std::move(dual);
  sol.iterations = iterations;
  return sol;
}

ConeProjectionSolution project_to_polar_cone(const ConeProjectionProblem& problem, double tol) {
  const Matrix& G = problem.signed_points;
  if (G.cols() != problem.probe.size()) throw DataError("cone projection: probe dimension mismatch");
  if (!G.allFinite() || !problem.probe.allFinite()) throw DataError("cone projection: non-finite input");
  for (Eigen::Index k = 0; k < G.rows(); ++k) {
    if (G.row(k).squaredNorm() == 0.0) throw DataError("cone projection: row " + std::to_string(k) + " is zero");
  }
  auto res = nnls(G, problem.probe, tol);
  return solution_from_dual(G, problem.probe, std::move(res.solution), res.iterations);
}

SeparabilityResult strictly_separable(const Matrix& G, double tol) {
  const Eigen::Index K = G.rows(), N = G.cols();
  if (K == 0) throw DataError("strictly_separable: no rows");
  SeparabilityResult out;
  const Vector norms = G.rowwise().norm();
  const double max_norm = norms.maxCoeff();
  for (Eigen::Index k = 0; k < K; ++k) {
    if (norms[k] == 0.0) {
      out.certificate = Vector::Zero(K);
      out.certificate[k] = 1.0;
      return out;
    }
  }

  // Least-distance form: minimize |theta| subject to (G_k/|G_k|) theta >= 1.
  Matrix E(K, N + 1);
  E.leftCols(N) = norms.cwiseInverse().asDiagonal() * G;
  E.col(N).setOnes();
  Vector f = Vector::Zero(N + 1);
  f[N] = 1.0;
  const Vector u = nnls(E, f, 1e-12).solution;
  const Vector r = E.transpose() * u - f;

  Vector mu = u.cwiseQuotient(norms);
  const double mass = mu.sum();
  if (mass > 0) mu /= mass;
  const double gap = (G.transpose() * mu).norm();
  if (mass > 0 && gap <= tol * max_norm) {
    out.certificate = std::move(mu);
    return out;
  }
  if (r[N] < 0) {
    Vector theta = -r.head(N) / r[N];
    if ((G * theta).minCoeff() > 0.0) {
      out.separable = true;
      out.witness = std::move(theta);
      return out;
    }
  }
  out.certificate = std::move(mu);
  return out;
}

}  // namespace gluekit
