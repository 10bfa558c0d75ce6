#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gluekit/cone_qp.hpp"
#include "gluekit/model.hpp"
#include "gluekit/rng.hpp"

namespace gluekit {

/// One (dichotomy, probe) sample and the per-manifold anchor points.
struct AnchorDraw {
  Dichotomy dichotomy;
  Vector probe;
  /// P x N; row i is the dual-weighted mean of manifold i's signed points.
  Matrix anchors;
  Vector dual_mass;
  std::vector<char> active;

  std::size_t num_active() const;
};

struct Estimate {
  double value = 0.0;
  double std_err = 0.0;
};

struct GlueOptions {
  std::size_t n_draws = 200;
  double qp_tol = kDefaultQpTol;
  unsigned threads = 1;
  /// Use |<.,.>| without normalization for the three alignments.
  bool absolute_alignments = false;
};

struct GlueReport {
  Estimate capacity;
  Estimate dimension;
  Estimate radius;
  Estimate center_align;
  Estimate axis_align;
  Estimate center_axis_align;
  std::size_t n_draws = 0;
  /// All axis parts vanish (point manifolds); dimension and radius are 0.
  bool degenerate = false;
  std::vector<std::string> warnings;
};

/// Reusable per-ensemble state (point Gram, norms) for repeated draws.
class AnchorSampler {
 public:
  explicit AnchorSampler(const ManifoldEnsemble& ensemble, double qp_tol = kDefaultQpTol);

  AnchorDraw draw(RngStream& rng) const;
  /// Draw k uses rng.substream(k).
  std::vector<AnchorDraw> draws(std::size_t n_draws, const RngStream& rng, unsigned threads = 1) const;

  const ManifoldEnsemble& ensemble() const { return ensemble_; }

 private:
  Vector solve_duals(const Vector& row_sign, const Vector& probe) const;

  const ManifoldEnsemble& ensemble_;
  double tol_;
  bool use_gram_;
  Matrix point_gram_;
  double max_row_norm_ = 0.0;
};

AnchorDraw sample_anchor_draw(const ManifoldEnsemble& ensemble, RngStream& rng, double qp_tol = kDefaultQpTol);

/// Mean-field capacity from a set of draws.
Estimate capacity_from_draws(const std::vector<AnchorDraw>& draws);

Estimate estimate_capacity(const ManifoldEnsemble& ensemble, std::size_t n_draws, const RngStream& rng,
                           unsigned threads = 1);

/// Capacity plus effective dimension, radius and alignments.
GlueReport analyze_draws(const ManifoldEnsemble& ensemble, const std::vector<AnchorDraw>& draws,
                         const GlueOptions& options = {});

GlueReport estimate_geometry(const ManifoldEnsemble& ensemble, const GlueOptions& options, const RngStream& rng);

/// (1 + R^-2) / D.
double capacity_from_geometry(double dimension, double radius);

/// v^T A^+ v for symmetric A, eigenvalues below 1e-10 * max dropped.
double pinv_quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& v);

}  // namespace gluekit
