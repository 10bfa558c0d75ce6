#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "gluekit/model.hpp"
#include "gluekit/rng.hpp"

namespace gluekit {

struct ProbPoint {
  std::size_t n = 0;
  double p_hat = 0.0;
  std::size_t trials = 0;
};

/// Measured separability probabilities, kept sorted by n.
struct ProbCurve {
  std::vector<ProbPoint> entries;

  void add(ProbPoint p);
  const ProbPoint* find(std::size_t n) const;
};

enum class SimMethod { BinarySearch, SumForm };

struct SimCapacityReport {
  double alpha_sim = 0.0;
  std::size_t critical_dim = 0;
  ProbCurve curve;
  SimMethod method = SimMethod::BinarySearch;
};

/// Draws the +-1 labels for one trial; defaults to uniform dichotomies.
using LabelSampler = std::function<Vector(RngStream&)>;

/// p_hat(n) for a given projection dimension.
using ProbOracle = std::function<double(std::size_t n)>;

/// Monte-Carlo separability after random Gaussian projection.
///
/// Trial j at dimension n uses rng.substream(n).substream(j), so results do
/// not depend on the thread count.
class SeparabilityProbe {
 public:
  SeparabilityProbe(const ManifoldEnsemble& ensemble, RngStream rng, unsigned threads = 1,
                    LabelSampler labels = nullptr);

  double est_prob(std::size_t n, std::size_t trials) const;
  /// Single trial outcome (exposed for tests).
  bool trial(std::size_t n, std::size_t index) const;

  std::size_t ambient_dim() const { return ambient_; }
  std::size_t num_manifolds() const { return ensemble_.num_manifolds(); }

 private:
  const ManifoldEnsemble& ensemble_;
  RngStream rng_;
  unsigned threads_;
  LabelSampler labels_;
  std::size_t ambient_;
  /// Points in a basis of their span (K x r).
  Matrix coords_;
};

double est_prob(const ManifoldEnsemble& ensemble, std::size_t n, std::size_t trials, const RngStream& rng,
                unsigned threads = 1);

/// Smallest n in [1, N] with p(n) >= 0.5 by bisection; p(N) is checked first.
std::size_t find_critical_dim(std::size_t N, const ProbOracle& p, ProbCurve* curve = nullptr);

std::size_t find_critical_dim(const ManifoldEnsemble& ensemble, std::size_t trials, const RngStream& rng,
                              unsigned threads = 1);

/// P / sum_{n=1..N} (1 - p_n) with p_n interpolated linearly in log n between measured points.
double sum_form_alpha(std::size_t P, std::size_t N, const ProbCurve& curve);

/// Geometric grid of about `count` dimensions in [1, N].
std::vector<std::size_t> geometric_grid(std::size_t N, std::size_t count = 24);

SimCapacityReport simulated_capacity(const ManifoldEnsemble& ensemble, std::size_t trials, const RngStream& rng,
                                     SimMethod method = SimMethod::BinarySearch, unsigned threads = 1,
                                     LabelSampler labels = nullptr);

}  // namespace gluekit
