#include "gluekit/glue.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gluekit/error.hpp"
#include "gluekit/parallel.hpp"

namespace gluekit {
namespace {

// Above this many points the K x K point Gram is skipped in favour of the row form.
constexpr std::size_t kMaxGramPoints = 6000;

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
  std::size_t n = 0;
};

Moments moments(const std::vector<double>& xs) {
  Moments m;
  m.n = xs.size();
  if (xs.empty()) return m;
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return m;
}

Estimate mean_estimate(const std::vector<double>& xs) {
  const auto m = moments(xs);
  return {m.mean, m.n > 0 ? m.sd / std::sqrt(static_cast<double>(m.n)) : 0.0};
}

Eigen::MatrixXd pinv_symmetric(const Eigen::MatrixXd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const auto& ev = es.eigenvalues();
  const double cut = 1e-10 * ev.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i]) > cut && ev[i] != 0.0) inv[i] = 1.0 / ev[i];
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

double pair_cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double na, double nb, bool absolute) {
  const double dot = a.dot(b);
  if (absolute) return std::abs(dot);
  return dot / (na * nb);
}

// Mean pairwise center alignment over i != j with non-zero centers.
double center_alignment(const Eigen::MatrixXd& centers, bool absolute) {
  const Eigen::Index P = centers.rows();
  const Eigen::VectorXd norms = centers.rowwise().norm();
  double sum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < P; ++i) {
    for (Eigen::Index j = 0; j < P; ++j) {
      if (i == j || norms[i] == 0.0 || norms[j] == 0.0) continue;
      sum += pair_cosine(centers.row(i), centers.row(j), norms[i], norms[j], absolute);
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

}  // namespace

std::size_t AnchorDraw::num_active() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), 1));
}

double pinv_quadratic(const Eigen::MatrixXd& A, const Eigen::VectorXd& v) {
  if (A.rows() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  const auto& ev = es.eigenvalues();
  const double cut = 1e-10 * ev.cwiseAbs().maxCoeff();
  const Eigen::VectorXd proj = es.eigenvectors().transpose() * v;
  double q = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev[i]) > cut && ev[i] != 0.0) q += proj[i] * proj[i] / ev[i];
  return q;
}

AnchorSampler::AnchorSampler(const ManifoldEnsemble& ensemble, double qp_tol)
    : ensemble_(ensemble), tol_(qp_tol), use_gram_(ensemble.total_points() <= kMaxGramPoints) {
  const Matrix& X = ensemble_.stacked();
  const Vector norms = X.rowwise().norm();
  max_row_norm_ = norms.maxCoeff();
  for (Eigen::Index k = 0; k < norms.size(); ++k) {
    if (norms[k] == 0.0) throw DataError("anchor sampling: point " + std::to_string(k) + " is the zero vector");
  }
  if (use_gram_) point_gram_.noalias() = X * X.transpose();
}

Vector AnchorSampler::solve_duals(const Vector& row_sign, const Vector& probe) const {
  const Matrix& X = ensemble_.stacked();
  if (use_gram_) {
    const Vector c = row_sign.cwiseProduct(X * probe);
    return nnls_signed_gram(point_gram_, row_sign, c, max_row_norm_ * probe.norm(), tol_).solution;
  }
  const Matrix G = row_sign.asDiagonal() * X;
  return nnls(G, probe, tol_).solution;
}

AnchorDraw AnchorSampler::draw(RngStream& rng) const {
  const std::size_t P = ensemble_.num_manifolds(), N = ensemble_.ambient_dim();
  AnchorDraw d;
  d.probe = sample_gaussian_probe(N, rng);
  d.dichotomy = sample_dichotomy(P, rng);

  const auto& owner = ensemble_.row_owner();
  Vector row_sign(static_cast<Eigen::Index>(owner.size()));
  for (std::size_t k = 0; k < owner.size(); ++k) row_sign[k] = d.dichotomy.signs[owner[k]];

  Vector dual;
  try {
    dual = solve_duals(row_sign, d.probe);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(e.what()) + " (anchor draw seed " + std::to_string(rng.seed()) + ", stream " +
                         std::to_string(rng.stream_id()) + ")");
  }

  d.anchors = Matrix::Zero(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(N));
  d.dual_mass = Vector::Zero(static_cast<Eigen::Index>(P));
  d.active.assign(P, 0);
  const auto& off = ensemble_.offsets();
  for (std::size_t i = 0; i < P; ++i) {
    const auto begin = static_cast<Eigen::Index>(off[i]);
    const auto len = static_cast<Eigen::Index>(off[i + 1] - off[i]);
    const double mass = dual.segment(begin, len).sum();
    d.dual_mass[i] = mass;
    if (mass > 0.0) {
      d.active[i] = 1;
      const Vector mean = ensemble_.stacked().middleRows(begin, len).transpose() * dual.segment(begin, len);
      d.anchors.row(i) = (d.dichotomy.signs[i] / mass) * mean.transpose();
    }
  }
  return d;
}

std::vector<AnchorDraw> AnchorSampler::draws(std::size_t n_draws, const RngStream& rng, unsigned threads) const {
  std::vector<AnchorDraw> out(n_draws);
  parallel_for(n_draws, threads, [&](std::size_t k) {
    RngStream s = rng.substream(k);
    out[k] = draw(s);
  });
  return out;
}

AnchorDraw sample_anchor_draw(const ManifoldEnsemble& ensemble, RngStream& rng, double qp_tol) {
  return AnchorSampler(ensemble, qp_tol).draw(rng);
}

Estimate capacity_from_draws(const std::vector<AnchorDraw>& draws) {
  if (draws.empty()) throw ConfigError("capacity needs at least one draw");
  const auto P = static_cast<double>(draws.front().anchors.rows());
  std::vector<double> q(draws.size(), 0.0);
  bool any_active = false;
  for (std::size_t k = 0; k < draws.size(); ++k) {
    const auto& d = draws[k];
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < d.active.size(); ++i)
      if (d.active[i]) rows.push_back(static_cast<Eigen::Index>(i));
    if (rows.empty()) continue;
    any_active = true;
    Eigen::MatrixXd S(rows.size(), d.anchors.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) S.row(r) = d.anchors.row(rows[r]);
    const Eigen::VectorXd v = S * d.probe;
    q[k] = pinv_quadratic(S * S.transpose(), v);
  }
  if (!any_active) throw NumericalError("capacity: every draw is degenerate (no active manifold)");
  const auto m = moments(q);
  if (!(m.mean > 0.0)) throw NumericalError("capacity: projected probe mass is zero");
  const double alpha = P / m.mean;
  const double se = alpha * (m.sd / std::sqrt(static_cast<double>(m.n))) / m.mean;
  return {alpha, se};
}

Estimate estimate_capacity(const ManifoldEnsemble& ensemble, std::size_t n_draws, const RngStream& rng,
                           unsigned threads) {
  if (n_draws < 1) throw ConfigError("estimate_capacity: n_draws must be >= 1");
  return capacity_from_draws(AnchorSampler(ensemble).draws(n_draws, rng, threads));
}

GlueReport analyze_draws(const ManifoldEnsemble& ensemble, const std::vector<AnchorDraw>& draws,
                         const GlueOptions& options) {
  if (draws.size() < 2) throw ConfigError("geometry needs at least 2 draws, got " + std::to_string(draws.size()));
  const auto P = static_cast<Eigen::Index>(ensemble.num_manifolds());
  const auto N = static_cast<Eigen::Index>(ensemble.ambient_dim());
  const std::size_t n = draws.size();
  const bool absolute = options.absolute_alignments;

  GlueReport rep;
  rep.n_draws = n;
  rep.capacity = capacity_from_draws(draws);

  // Centers from unsigned anchors y_i * s_i over the draws where manifold i is active.
  std::vector<Eigen::MatrixXd> unsigned_anchors(n);
  Eigen::MatrixXd center_sum = Eigen::MatrixXd::Zero(P, N);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(P);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& d = draws[k];
    unsigned_anchors[k] = d.dichotomy.signs.asDiagonal() * d.anchors;
    for (Eigen::Index i = 0; i < P; ++i) {
      if (!d.active[i]) continue;
      center_sum.row(i) += unsigned_anchors[k].row(i);
      count[i] += 1.0;
    }
  }
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(P, N);
  for (Eigen::Index i = 0; i < P; ++i) {
    if (count[i] > 0) {
      centers.row(i) = center_sum.row(i) / count[i];
    } else {
      rep.warnings.push_back("manifold " + std::to_string(i) + " is inactive in every draw; excluded from alignments");
    }
  }
  const Eigen::VectorXd center_norms = centers.rowwise().norm();
  const Eigen::MatrixXd G0 = centers * centers.transpose();
  const Eigen::MatrixXd G0_pinv = pinv_symmetric(G0);

  std::vector<double> dim_terms, radius_terms, axis_terms, center_axis_terms;
  double max_axis_norm = 0.0;
  std::vector<Eigen::MatrixXd> axes(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& d = draws[k];
    Eigen::MatrixXd& s1 = axes[k];
    s1 = Eigen::MatrixXd::Zero(P, N);
    for (Eigen::Index i = 0; i < P; ++i)
      if (d.active[i]) s1.row(i) = unsigned_anchors[k].row(i) - centers.row(i);
    max_axis_norm = std::max(max_axis_norm, s1.rowwise().norm().maxCoeff());
  }
  rep.degenerate = !(max_axis_norm > 1e-9 * std::max(center_norms.maxCoeff(), 1e-300));

  for (std::size_t k = 0; k < n; ++k) {
    const auto& d = draws[k];
    const Eigen::MatrixXd& s1 = axes[k];
    const Eigen::VectorXd axis_norms = s1.rowwise().norm();

    if (!rep.degenerate) {
      const Eigen::VectorXd t1 = s1 * d.probe;
      const Eigen::MatrixXd G1 = s1 * s1.transpose();
      dim_terms.push_back(pinv_quadratic(G1, t1) / static_cast<double>(P));
      const double num = pinv_quadratic(G1 + G0, t1);
      const double den = pinv_quadratic(G1 + G1 * G0_pinv * G1, t1);
      if (den > 0.0) radius_terms.push_back(num / den);
    }

    double a_sum = 0.0, c_sum = 0.0;
    std::size_t a_cnt = 0, c_cnt = 0;
    for (Eigen::Index j = 0; j < P; ++j) {
      if (!d.active[j] || axis_norms[j] == 0.0) continue;
      for (Eigen::Index i = 0; i < P; ++i) {
        if (i == j) continue;
        if (d.active[i] && axis_norms[i] > 0.0) {
          a_sum += pair_cosine(s1.row(i), s1.row(j), axis_norms[i], axis_norms[j], absolute);
          ++a_cnt;
        }
        if (center_norms[i] > 0.0) {
          c_sum += pair_cosine(centers.row(i), s1.row(j), center_norms[i], axis_norms[j], absolute);
          ++c_cnt;
        }
      }
    }
    if (a_cnt) axis_terms.push_back(a_sum / static_cast<double>(a_cnt));
    if (c_cnt) center_axis_terms.push_back(c_sum / static_cast<double>(c_cnt));
  }

  if (!rep.degenerate) {
    rep.dimension = mean_estimate(dim_terms);
    const auto r = moments(radius_terms);
    if (r.n > 0 && r.mean > 0.0) {
      rep.radius.value = std::sqrt(r.mean);
      rep.radius.std_err = r.sd / std::sqrt(static_cast<double>(r.n)) / (2.0 * rep.radius.value);
    }
  }
  rep.axis_align = mean_estimate(axis_terms);
  rep.center_axis_align = mean_estimate(center_axis_terms);

  // Center alignment with a leave-one-draw-out jackknife error.
  rep.center_align.value = center_alignment(centers, absolute);
  std::vector<double> loo(n);
  for (std::size_t k = 0; k < n; ++k) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(P, N);
    for (Eigen::Index i = 0; i < P; ++i) {
      const double act = draws[k].active[i] ? 1.0 : 0.0;
      const double cnt = count[i] - act;
      if (cnt > 0) c.row(i) = (center_sum.row(i) - act * unsigned_anchors[k].row(i)) / cnt;
    }
    loo[k] = center_alignment(c, absolute);
  }
  const double loo_mean = std::accumulate(loo.begin(), loo.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : loo) ss += (v - loo_mean) * (v - loo_mean);
  rep.center_align.std_err = std::sqrt(ss * static_cast<double>(n - 1) / static_cast<double>(n));
  return rep;
}

GlueReport estimate_geometry(const ManifoldEnsemble& ensemble, const GlueOptions& options, const RngStream& rng) {
  if (options.n_draws < 2) throw ConfigError("estimate_geometry: n_draws must be >= 2");
  AnchorSampler sampler(ensemble, options.qp_tol);
  return analyze_draws(ensemble, sampler.draws(options.n_draws, rng, options.threads), options);
}

double capacity_from_geometry(double dimension, double radius) {
  if (!(dimension > 0.0) || !(radius > 0.0)) {
    throw NumericalError("capacity_from_geometry: dimension and radius must be positive (got D=" +
                         std::to_string(dimension) + ", R=" + std::to_string(radius) + ")");
  }
  return (1.0 + 1.0 / (radius * radius)) / dimension;
}

}  // namespace gluekit
