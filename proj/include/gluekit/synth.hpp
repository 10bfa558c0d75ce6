#pragma once

#include <cstddef>
#include <vector>

#include "gluekit/model.hpp"
#include "gluekit/rng.hpp"

namespace gluekit {

struct SphericalSpec {
  std::size_t P = 2;
  std::size_t M = 50;
  std::size_t D = 2;
  double R = 1.0;
  std::size_t d = 100;
  double noise_eps = 1e-2;
};

struct CorrelationSpec {
  double rho_center = 0.0;
  double rho_axis = 0.0;
  double psi_center_axis = 0.0;
};

/// Train/test ensembles sharing centers, axes and coordinates.
struct SyntheticEnsembles {
  ManifoldEnsemble train;
  ManifoldEnsemble test;
  /// P x d
  Matrix centers;
  /// D matrices of P x d; axes[j].row(i) is axis j of manifold i.
  std::vector<Matrix> axes;
};

/// Points u0 + R * unit(sum_j s_j u_j) + eps * v.
SyntheticEnsembles gen_isotropic_spherical(const SphericalSpec& spec, const RngStream& rng);

/// Points u0 + R * v with v ~ N(0, I/d); the test set redraws v.
SyntheticEnsembles gen_isotropic_gaussian(std::size_t P, std::size_t M, double R, std::size_t d,
                                          const RngStream& rng);

/// Spherical generator with AR(1) center/axis mixing and center rescaling.
SyntheticEnsembles apply_correlations(const SphericalSpec& spec, const CorrelationSpec& corr, const RngStream& rng);

/// Lower Cholesky factor of (rho^|i-j|).
Matrix ar1_cholesky(std::size_t P, double rho);

/// i.i.d. uniform +-1 labels.
Vector assign_labels(std::size_t P, RngStream& rng);

}  // namespace gluekit
