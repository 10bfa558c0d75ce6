#pragma once

#include <cstddef>
#include <vector>

#include "gluekit/model.hpp"

namespace gluekit {

/// min 1/2 |x|^2 - t.x  subject to  G x <= 0.
struct ConeProjectionProblem {
  Vector probe;
  Matrix signed_points;
  std::vector<int> row_owner;
};

struct ConeProjectionSolution {
  Vector x_star;
  Vector dual;
  Vector cone_proj;
  std::vector<int> active_set;
  std::size_t iterations = 0;
};

struct NnlsResult {
  Vector solution;
  std::size_t iterations = 0;
};

constexpr double kDefaultQpTol = 1e-8;
constexpr double kDefaultSeparabilityTol = 1e-10;

/// argmin_{l >= 0} |b - A^T l|^2 (Lawson-Hanson active set). `A` is K x N.
NnlsResult nnls(const Matrix& A, const Vector& b, double tol = kDefaultQpTol);

/// Same problem given only H = A A^T and c = A b. `scale` sets the absolute
/// size of the gradient tolerance (typically max_k |A_k| * |b|).
NnlsResult nnls_gram(const Matrix& H, const Vector& c, double scale, double tol = kDefaultQpTol);

/// Gram form with H_ij = sign_i * sign_j * point_gram_ij, so one point Gram
/// serves every dichotomy.
NnlsResult nnls_signed_gram(const Matrix& point_gram, const Vector& row_sign, const Vector& c, double scale,
                            double tol = kDefaultQpTol);

/// Projection of the probe onto the polar cone of the rows of G; the dual
/// of the NNLS gives cone_proj = G^T dual.
ConeProjectionSolution project_to_polar_cone(const ConeProjectionProblem& problem, double tol = kDefaultQpTol);

/// Builds a solution record from duals (x_star, cone_proj, active set).
ConeProjectionSolution solution_from_dual(const Matrix& signed_points, const Vector& probe, Vector dual,
                                          std::size_t iterations = 0);

struct SeparabilityResult {
  bool separable = false;
  /// theta with G theta > 0 (when separable).
  Vector witness;
  /// mu >= 0, sum mu = 1, |G^T mu| small (when not separable).
  Vector certificate;
};

/// Is there theta with every row of G strictly positive on it?
SeparabilityResult strictly_separable(const Matrix& signed_points, double tol = kDefaultSeparabilityTol);

}  // namespace gluekit
