#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gluekit/rng.hpp"

namespace gluekit {

/// Row-major dense matrix; rows are samples / representation vectors.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One class manifold: M points in R^N, used as convex-hull generators.
struct PointCloudManifold {
  int label_id = 0;
  Matrix points;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points.cols()); }
};

/// P manifolds sharing one ambient dimension N.
///
/// Labels are dense (0..P-1, in ascending order of the original label);
/// `original_labels()[i]` keeps the label the caller supplied. The stacked
/// K x N point matrix and the row -> manifold map are built once at
/// construction since every estimator consumes them.
class ManifoldEnsemble {
 public:
  ManifoldEnsemble() = default;
  explicit ManifoldEnsemble(std::vector<PointCloudManifold> manifolds,
                            std::vector<std::int64_t> original_labels = {});

  std::size_t num_manifolds() const { return manifolds_.size(); }
  std::size_t ambient_dim() const { return ambient_dim_; }
  std::size_t total_points() const { return static_cast<std::size_t>(stacked_.rows()); }

  const PointCloudManifold& manifold(std::size_t i) const { return manifolds_[i]; }
  const std::vector<PointCloudManifold>& manifolds() const { return manifolds_; }
  const std::vector<std::int64_t>& original_labels() const { return original_labels_; }

  /// All points, manifold after manifold.
  const Matrix& stacked() const { return stacked_; }
  /// Manifold index of each stacked row.
  const std::vector<int>& row_owner() const { return row_owner_; }
  /// Row offset of manifold i in `stacked()`; offsets()[P] == total_points().
  const std::vector<std::size_t>& offsets() const { return offsets_; }

  /// Same manifolds with every point mapped through `transform` (N' x N).
  ManifoldEnsemble transformed(const Matrix& transform) const;

 private:
  std::vector<PointCloudManifold> manifolds_;
  std::vector<std::int64_t> original_labels_;
  std::size_t ambient_dim_ = 0;
  Matrix stacked_;
  std::vector<int> row_owner_;
  std::vector<std::size_t> offsets_;
};

/// Groups labeled vectors into an ensemble (ascending label order, stable
/// within a label). Throws DataError on empty input, mixed dimensions or
/// non-finite entries.
ManifoldEnsemble build_ensemble(const std::vector<std::pair<std::int64_t, Vector>>& labeled_vectors);

/// Same, from a sample matrix and a parallel label array.
ManifoldEnsemble build_ensemble(const Matrix& samples, const std::vector<std::int64_t>& labels);

/// Inverse of build_ensemble: (original label, vector) pairs in stacked order.
std::vector<std::pair<std::int64_t, Vector>> flatten(const ManifoldEnsemble& ensemble);

/// A +-1 labeling of the P manifolds.
struct Dichotomy {
  Vector signs;

  std::size_t size() const { return static_cast<std::size_t>(signs.size()); }
};

Dichotomy sample_dichotomy(std::size_t count, RngStream& rng);

/// i.i.d. standard normal vector.
Vector sample_gaussian_probe(std::size_t dim, RngStream& rng);

/// Fills a matrix with i.i.d. N(0, stddev^2) entries in row-major order.
Matrix sample_gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, RngStream& rng);

}  // namespace gluekit
