#include "gluekit/sim_capacity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gluekit/cone_qp.hpp"
#include "gluekit/error.hpp"
#include "gluekit/parallel.hpp"

namespace gluekit {

void ProbCurve::add(ProbPoint p) {
  auto it = std::lower_bound(entries.begin(), entries.end(), p.n,
                             [](const ProbPoint& a, std::size_t n) { return a.n < n; });
  if (it != entries.end() && it->n == p.n) {
    *it = p;
  } else {
    entries.insert(it, p);
  }
}

const ProbPoint* ProbCurve::find(std::size_t n) const {
  for (const auto& e : entries)
    if (e.n == n) return &e;
  return nullptr;
}

SeparabilityProbe::SeparabilityProbe(const ManifoldEnsemble& ensemble, RngStream rng, unsigned threads,
                                     LabelSampler labels)
    : ensemble_(ensemble), rng_(rng), threads_(threads), labels_(std::move(labels)), ambient_(ensemble.ambient_dim()) {
  const Matrix& X = ensemble.stacked();
  if (X.rows() < X.cols()) {
    // Gaussian projections are rotation invariant, so projecting coordinates in
    // an orthonormal basis of the span is equivalent and cheaper.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X * X.transpose());
    const auto& ev = es.eigenvalues();
    const double cut = 1e-12 * std::max(ev.maxCoeff(), 0.0);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = ev.size(); i-- > 0;)
      if (ev[i] > cut) keep.push_back(i);
    coords_.resize(X.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
      coords_.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(keep[c]) * std::sqrt(ev[keep[c]]);
  } else {
    coords_ = X;
  }
}

bool SeparabilityProbe::trial(std::size_t n, std::size_t index) const {
  RngStream s = rng_.substream(n).substream(index);
  const std::size_t P = ensemble_.num_manifolds();
  const Vector y = labels_ ? labels_(s) : sample_dichotomy(P, s).signs;
  if (static_cast<std::size_t>(y.size()) != P) throw DataError("label sampler returned the wrong number of labels");
  const auto& owner = ensemble_.row_owner();
  Vector row_sign(static_cast<Eigen::Index>(owner.size()));
  for (std::size_t k = 0; k < owner.size(); ++k) row_sign[k] = y[owner[k]];

  const auto r = static_cast<std::size_t>(coords_.cols());
  if (n >= r) {
    // An n x r Gaussian map with n >= r is injective almost surely.
    return strictly_separable(row_sign.asDiagonal() * coords_).separable;
  }
  const Matrix proj = sample_gaussian_matrix(n, r, 1.0 / std::sqrt(static_cast<double>(n)), s);
  Matrix pts = coords_ * proj.transpose();
  pts = row_sign.asDiagonal() * pts;
  return strictly_separable(pts).separable;
}

double SeparabilityProbe::est_prob(std::size_t n, std::size_t trials) const {
  if (n < 1 || n > ambient_) throw ConfigError("est_prob: n=" + std::to_string(n) + " outside [1, " + std::to_string(ambient_) + "]");
  if (trials < 1) throw ConfigError("est_prob: need at least one trial");
  std::vector<char> hits(trials, 0);
  parallel_for(trials, threads_, [&](std::size_t j) { hits[j] = trial(n, j) ? 1 : 0; });
  std::size_t count = 0;
  for (char h : hits) count += static_cast<std::size_t>(h);
  return static_cast<double>(count) / static_cast<double>(trials);
}

double est_prob(const ManifoldEnsemble& ensemble, std::size_t n, std::size_t trials, const RngStream& rng,
                unsigned threads) {
  return SeparabilityProbe(ensemble, rng, threads).est_prob(n, trials);
}

std::size_t find_critical_dim(std::size_t N, const ProbOracle& p, ProbCurve* curve) {
  if (N < 1) throw ConfigError("find_critical_dim: N must be >= 1");
  auto eval = [&](std::size_t n) {
    const double v = p(n);
    if (curve) curve->add({n, v, 0});
    return v;
  };
  if (eval(N) < 0.5) throw NumericalError("unseparable at ambient dimension (p(N) < 0.5, N=" + std::to_string(N) + ")");
  // invariant: p(lo) < 0.5 <= p(hi), with p(0) taken as 0
  std::size_t lo = 0, hi = N;
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (eval(mid) >= 0.5) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

namespace {

ProbOracle oracle_for(const SeparabilityProbe& probe, std::size_t trials, ProbCurve& curve) {
  return [&probe, trials, &curve](std::size_t n) {
    if (const auto* hit = curve.find(n)) return hit->p_hat;
    const double v = probe.est_prob(n, trials);
    curve.add({n, v, trials});
    return v;
  };
}

}  // namespace

std::size_t find_critical_dim(const ManifoldEnsemble& ensemble, std::size_t trials, const RngStream& rng,
                              unsigned threads) {
  SeparabilityProbe probe(ensemble, rng, threads);
  ProbCurve curve;
  return find_critical_dim(ensemble.ambient_dim(), oracle_for(probe, trials, curve));
}

std::vector<std::size_t> geometric_grid(std::size_t N, std::size_t count) {
  std::vector<std::size_t> grid;
  if (N < 1) return grid;
  count = std::max<std::size_t>(count, 2);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = std::exp(std::log(static_cast<double>(N)) * static_cast<double>(i) / static_cast<double>(count - 1));
    grid.push_back(std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(x)), 1, N));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

double sum_form_alpha(std::size_t P, std::size_t N, const ProbCurve& curve) {
  const auto& pts = curve.entries;
  if (pts.empty()) throw NumericalError("sum form: empty probability curve");
  double total = 0.0;
  std::size_t seg = 0;
  for (std::size_t n = 1; n <= N; ++n) {
    double p;
    if (n <= pts.front().n) {
      p = pts.front().p_hat;
    } else if (n >= pts.back().n) {
      p = pts.back().p_hat;
    } else {
      while (pts[seg + 1].n < n) ++seg;
      const auto& a = pts[seg];
      const auto& b = pts[seg + 1];
      const double w = (std::log(double(n)) - std::log(double(a.n))) / (std::log(double(b.n)) - std::log(double(a.n)));
      p = a.p_hat + w * (b.p_hat - a.p_hat);
    }
    total += 1.0 - p;
  }
  if (!(total > 0.0)) throw NumericalError("sum form: sum of (1 - p_n) is zero (separable already at n = 1)");
  return static_cast<double>(P) / total;
}

SimCapacityReport simulated_capacity(const ManifoldEnsemble& ensemble, std::size_t trials, const RngStream& rng,
                                     SimMethod method, unsigned threads, LabelSampler labels) {
  SeparabilityProbe probe(ensemble, rng, threads, std::move(labels));
  SimCapacityReport rep;
  rep.method = method;
  const auto oracle = oracle_for(probe, trials, rep.curve);
  const std::size_t N = ensemble.ambient_dim();
  rep.critical_dim = find_critical_dim(N, oracle);
  const auto P = static_cast<double>(ensemble.num_manifolds());
  if (method == SimMethod::BinarySearch) {
    rep.alpha_sim = P / static_cast<double>(rep.critical_dim);
  } else {
    for (std::size_t n : geometric_grid(N)) oracle(n);
    rep.alpha_sim = sum_form_alpha(ensemble.num_manifolds(), N, rep.curve);
  }
  return rep;
}

}  // namespace gluekit
