#pragma once

// Lawson-Hanson active-set NNLS on the Gram form
//   min_{l >= 0}  l^T H l - 2 c^T l
// with an incrementally maintained Cholesky factor of H restricted to the
// passive set. The backend supplies H entries, c, and the gradient c - H l.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gluekit/error.hpp"

namespace gluekit::detail {

class PassiveCholesky {
 public:
  explicit PassiveCholesky(std::size_t capacity) { grow(std::max<std::size_t>(capacity, 8)); }

  std::size_t size() const { return n_; }

  // Appends a column; returns false when the new pivot is numerically zero.
  template <class Backend>
  bool append(const Backend& be, const std::vector<std::size_t>& passive, std::size_t k) {
    if (n_ + 1 > static_cast<std::size_t>(L_.rows())) grow(2 * L_.rows());
    Eigen::VectorXd h(n_);
    for (std::size_t i = 0; i < n_; ++i) h[i] = be.gram(passive[i], k);
    Eigen::VectorXd l = h;
    forward(l);
    const double hkk = be.gram(k, k);
    const double d = hkk - l.squaredNorm();
    if (!(d > 1e-12 * hkk) || !(hkk > 0)) return false;
    L_.row(n_).head(n_) = l.transpose();
    L_(n_, n_) = std::sqrt(d);
    ++n_;
    return true;
  }

  // Drops passive position p and restores the triangle with Givens rotations.
  void remove(std::size_t p) {
    for (std::size_t i = p; i + 1 < n_; ++i) L_.row(i).head(n_) = L_.row(i + 1).head(n_);
    --n_;
    for (std::size_t j = p; j < n_; ++j) {
      const double a = L_(j, j), b = L_(j, j + 1);
      const double r = std::hypot(a, b);
      if (r == 0.0) continue;
      const double c = a / r, s = b / r;
      for (std::size_t i = j; i < n_; ++i) {
        const double x = L_(i, j), y = L_(i, j + 1);
        L_(i, j) = c * x + s * y;
        L_(i, j + 1) = -s * x + c * y;
      }
      if (L_(j, j) < 0) L_.col(j).segment(j, n_ - j) *= -1.0;
    }
    for (std::size_t i = 0; i < n_ + 1 && i < static_cast<std::size_t>(L_.rows()); ++i) L_(i, n_) = 0.0;
  }

  // Full refactorization; returns false if the passive Gram lost definiteness.
  template <class Backend>
  bool rebuild(const Backend& be, const std::vector<std::size_t>& passive) {
    n_ = passive.size();
    Eigen::MatrixXd H(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j <= i; ++j) H(i, j) = H(j, i) = be.gram(passive[i], passive[j]);
    Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) return false;
    L_.topLeftCorner(n_, n_) = llt.matrixL();
    return true;
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd z = rhs;
    forward(z);
    backward(z);
    return z;
  }

 private:
  void grow(Eigen::Index cap) {
    Eigen::MatrixXd bigger = Eigen::MatrixXd::Zero(cap, cap);
    if (n_ > 0) bigger.topLeftCorner(n_, n_) = L_.topLeftCorner(n_, n_);
    L_.swap(bigger);
  }
  void forward(Eigen::VectorXd& v) const {
    const auto n = static_cast<Eigen::Index>(v.size());
    L_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(v);
  }
  void backward(Eigen::VectorXd& v) const {
    const auto n = static_cast<Eigen::Index>(v.size());
    L_.topLeftCorner(n, n).transpose().triangularView<Eigen::Upper>().solveInPlace(v);
  }

  Eigen::MatrixXd L_;
  std::size_t n_ = 0;
};

struct ActiveSetOutcome {
  Eigen::VectorXd x;
  std::size_t iterations = 0;
};

// Backend contract:
//   size() -> K
//   gram(i, j) -> H_ij
//   rhs(k) -> c_k
//   gradient(x, passive, w) -> w = c - H x (x zero outside passive)
//   scale() -> magnitude used to make `tol` relative
template <class Backend>
ActiveSetOutcome solve_active_set(const Backend& be, double tol) {
  if (!(tol > 0)) throw ConfigError("nnls tolerance must be positive");
  const std::size_t K = be.size();
  ActiveSetOutcome out;
  out.x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(K));
  if (K == 0) return out;

  const double gtol = tol * std::max(be.scale(), std::numeric_limits<double>::min());
  const std::size_t max_iter = 50 * K;
  constexpr std::size_t kRefactorEvery = 50;

  std::vector<std::size_t> passive;
  std::vector<char> in_passive(K, 0), blocked(K, 0);
  PassiveCholesky chol(std::min<std::size_t>(K, 64));
  Eigen::VectorXd w(static_cast<Eigen::Index>(K));
  be.gradient(out.x, passive, w);
  std::size_t pivots = 0;

  auto rhs_of = [&] {
    Eigen::VectorXd c(static_cast<Eigen::Index>(passive.size()));
    for (std::size_t i = 0; i < passive.size(); ++i) c[i] = be.rhs(passive[i]);
    return c;
  };
  auto drop_at = [&](std::size_t p) {
    in_passive[passive[p]] = 0;
    out.x[passive[p]] = 0.0;
    passive.erase(passive.begin() + static_cast<std::ptrdiff_t>(p));
    chol.remove(p);
    ++pivots;
  };

  for (;;) {
    std::size_t best = K;
    double best_w = gtol;
    for (std::size_t k = 0; k < K; ++k) {
      if (in_passive[k] || blocked[k]) continue;
      if (w[k] > best_w) {
        best_w = w[k];
        best = k;
      }
    }
    if (best == K) break;
    if (++out.iterations > max_iter) {
      throw NumericalError("nnls: iteration cap " + std::to_string(max_iter) + " exceeded (max gradient " +
                           std::to_string(best_w) + ", tolerance " + std::to_string(gtol) + ")");
    }

    if (!chol.append(be, passive, best)) {
      blocked[best] = 1;
      continue;
    }
    passive.push_back(best);
    in_passive[best] = 1;
    ++pivots;

    bool progressed = false;
    for (;;) {
      if (pivots >= kRefactorEvery) {
        pivots = 0;
        if (!chol.rebuild(be, passive)) throw NumericalError("nnls: passive Gram is not positive definite");
      }
      Eigen::VectorXd z = chol.solve(rhs_of());
      if (passive.back() == best && !progressed && z[static_cast<Eigen::Index>(passive.size()) - 1] <= 0.0) {
        // The entering variable cannot move; keep it out until the iterate changes.
        drop_at(passive.size() - 1);
        blocked[best] = 1;
        break;
      }
      if ((z.array() > 0.0).all()) {
        for (std::size_t i = 0; i < passive.size(); ++i) out.x[passive[i]] = z[i];
        progressed = true;
        break;
      }
      double step = 1.0;
      for (std::size_t i = 0; i < passive.size(); ++i) {
        if (z[i] <= 0.0) {
          const double xi = out.x[passive[i]];
          step = std::min(step, xi / (xi - z[i]));
        }
      }
      for (std::size_t i = 0; i < passive.size(); ++i) {
        double& xi = out.x[passive[i]];
        xi += step * (z[i] - xi);
      }
      progressed = true;
      const double floor = 1e-14 * out.x.maxCoeff();
      for (std::size_t p = passive.size(); p-- > 0;) {
        if (out.x[passive[p]] <= floor) drop_at(p);
      }
      if (passive.empty()) break;
      if (++out.iterations > max_iter) throw NumericalError("nnls: iteration cap exceeded in inner loop");
    }
    if (progressed) std::fill(blocked.begin(), blocked.end(), 0);
    be.gradient(out.x, passive, w);
  }
  return out;
}

}  // namespace gluekit::detail
