#include "gluekit/model.hpp"

#include <cmath>
#include <map>
#include <string>

#include "gluekit/error.hpp"

namespace gluekit {

ManifoldEnsemble::ManifoldEnsemble(std::vector<PointCloudManifold> manifolds,
                                   std::vector<std::int64_t> original_labels)
    : manifolds_(std::move(manifolds)), original_labels_(std::move(original_labels)) {
  if (manifolds_.empty()) throw DataError("ensemble needs at least one manifold");
  if (original_labels_.empty()) {
    for (std::size_t i = 0; i < manifolds_.size(); ++i) original_labels_.push_back(static_cast<std::int64_t>(i));
  }
  if (original_labels_.size() != manifolds_.size()) throw DataError("label map size does not match manifold count");

  ambient_dim_ = manifolds_.front().dim();
  std::size_t total = 0;
  for (std::size_t i = 0; i < manifolds_.size(); ++i) {
    auto& m = manifolds_[i];
    m.label_id = static_cast<int>(i);
    if (m.size() == 0) throw DataError("manifold " + std::to_string(i) + " has no points");
    if (m.dim() == 0 || m.dim() != ambient_dim_) {
      throw DataError("dimension mismatch: manifold " + std::to_string(i) + " has dimension " +
                      std::to_string(m.dim()) + ", expected " + std::to_string(ambient_dim_));
    }
    if (!m.points.allFinite()) throw DataError("non-finite entry in manifold " + std::to_string(i));
    total += m.size();
  }

  stacked_.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(ambient_dim_));
  row_owner_.reserve(total);
  offsets_.reserve(manifolds_.size() + 1);
  std::size_t row = 0;
  for (std::size_t i = 0; i < manifolds_.size(); ++i) {
    offsets_.push_back(row);
    const auto& m = manifolds_[i];
    stacked_.middleRows(static_cast<Eigen::Index>(row), m.points.rows()) = m.points;
    row += m.size();
    row_owner_.insert(row_owner_.end(), m.size(), static_cast<int>(i));
  }
  offsets_.push_back(row);
}

ManifoldEnsemble ManifoldEnsemble::transformed(const Matrix& transform) const {
  std::vector<PointCloudManifold> out;
  out.reserve(manifolds_.size());
  for (const auto& m : manifolds_) out.push_back({m.label_id, m.points * transform.transpose()});
  return ManifoldEnsemble(std::move(out), original_labels_);
}

ManifoldEnsemble build_ensemble(const std::vector<std::pair<std::int64_t, Vector>>& labeled_vectors) {
  if (labeled_vectors.empty()) throw DataError("cannot build an ensemble from empty input");
  const Eigen::Index dim = labeled_vectors.front().second.size();
  std::map<std::int64_t, std::vector<const Vector*>> groups;
  for (std::size_t k = 0; k < labeled_vectors.size(); ++k) {
    const auto& [label, v] = labeled_vectors[k];
    if (v.size() != dim) {
      throw DataError("dimension mismatch at vector " + std::to_string(k) + ": " + std::to_string(v.size()) +
                      " vs " + std::to_string(dim));
    }
    if (!v.allFinite()) throw DataError("non-finite entry in vector " + std::to_string(k));
    groups[label].push_back(&v);
  }
  std::vector<PointCloudManifold> manifolds;
  std::vector<std::int64_t> labels;
  for (const auto& [label, members] : groups) {
    PointCloudManifold m;
    m.label_id = static_cast<int>(manifolds.size());
    m.points.resize(static_cast<Eigen::Index>(members.size()), dim);
    for (std::size_t r = 0; r < members.size(); ++r) m.points.row(static_cast<Eigen::Index>(r)) = members[r]->transpose();
    manifolds.push_back(std::move(m));
    labels.push_back(label);
  }
  return ManifoldEnsemble(std::move(manifolds), std::move(labels));
}

ManifoldEnsemble build_ensemble(const Matrix& samples, const std::vector<std::int64_t>& labels) {
  if (static_cast<std::size_t>(samples.rows()) != labels.size()) {
    throw DataError("label count " + std::to_string(labels.size()) + " does not match sample count " +
                    std::to_string(samples.rows()));
  }
  std::vector<std::pair<std::int64_t, Vector>> pairs;
  pairs.reserve(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) pairs.emplace_back(labels[k], samples.row(static_cast<Eigen::Index>(k)).transpose());
  return build_ensemble(pairs);
}

std::vector<std::pair<std::int64_t, Vector>> flatten(const ManifoldEnsemble& ensemble) {
  std::vector<std::pair<std::int64_t, Vector>> out;
  out.reserve(ensemble.total_points());
  for (std::size_t i = 0; i < ensemble.num_manifolds(); ++i) {
    const auto& m = ensemble.manifold(i);
    for (Eigen::Index r = 0; r < m.points.rows(); ++r) out.emplace_back(ensemble.original_labels()[i], m.points.row(r).transpose());
  }
  return out;
}

Dichotomy sample_dichotomy(std::size_t count, RngStream& rng) {
  Dichotomy y;
  y.signs.resize(static_cast<Eigen::Index>(count));
  for (Eigen::Index i = 0; i < y.signs.size(); ++i) y.signs[i] = rng.sign();
  return y;
}

Vector sample_gaussian_probe(std::size_t dim, RngStream& rng) {
  Vector t(static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = rng.normal();
  return t;
}

Matrix sample_gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, RngStream& rng) {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  double* data = m.data();
  for (Eigen::Index k = 0; k < m.size(); ++k) data[k] = stddev * rng.normal();
  return m;
}

}  // namespace gluekit
