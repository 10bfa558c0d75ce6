#include "gluekit/theory.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "gluekit/cone_qp.hpp"
#include "gluekit/error.hpp"
#include "gluekit/parallel.hpp"
#include "gluekit/quadrature.hpp"

namespace gluekit {

double cover_prob(std::size_t N, std::size_t P) {
  if (N < 1 || P < 1) throw ConfigError("cover_prob: N and P must be >= 1");
  if (P <= N) return 1.0;
  // 2^{1-P} sum_{k<N} C(P-1, k), summed in log space
  const double n = static_cast<double>(P - 1);
  std::vector<double> logs;
  logs.reserve(N);
  for (std::size_t k = 0; k < N; ++k) {
    const double kk = static_cast<double>(k);
    logs.push_back(std::lgamma(n + 1) - std::lgamma(kk + 1) - std::lgamma(n - kk + 1));
  }
  const double mx = *std::max_element(logs.begin(), logs.end());
  long double s = 0.0L;
  for (double l : logs) s += std::exp(static_cast<long double>(l - mx));
  const double logp = mx + std::log(static_cast<double>(s)) - n * std::numbers::ln2;
  return std::min(1.0, std::exp(logp));
}

LabelFunction logistic_link(double slope) {
  return {"logistic", slope, [slope](double g) { return 1.0 / (1.0 + std::exp(-slope * g)); }};
}

LabelFunction constant_link(double value) {
  if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("constant link must lie in [0, 1]");
  return {"constant", value, [value](double) { return value; }};
}

LabelFunction sign_link() {
  return {"sign", 0.0, [](double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? 0.0 : 0.5); }};
}

ActivationMoments activation_moments(const Activation& activation, std::size_t quadrature_order) {
  const QuadratureRule rule = normal_rule(quadrature_order);
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double x = rule.nodes[i];
    const double s = activation(x);
    if (!std::isfinite(s)) throw NumericalError("activation is not finite at quadrature node " + std::to_string(x));
    m1 += rule.weights[i] * x * s;
    m2 += rule.weights[i] * s * s;
  }
  ActivationMoments out;
  out.gamma1 = m1;
  out.gamma2_sq = std::max(0.0, m2 - m1 * m1);
  out.gamma_star_sq = out.gamma2_sq;
  return out;
}

double mp_expectation(const std::function<double(double)>& g, double psi1, std::size_t points) {
  if (!(psi1 > 0.0)) throw ConfigError("mp_expectation: psi1 must be positive");
  if (points < 16) throw ConfigError("mp_expectation: need at least 16 points");
  // Y ~ MP(ratio psi1) on [(1 - sqrt psi1)^2, (1 + sqrt psi1)^2]; X = Y / psi1.
  const double sq = std::sqrt(psi1);
  const double a = (1.0 - sq) * (1.0 - sq), b = (1.0 + sq) * (1.0 + sq);
  const double c = 0.5 * (a + b), r = 0.5 * (b - a);
  // x = c + r cos(theta): density * dx = r^2 sin^2 / (2 pi psi1 x) dtheta, midpoint rule
  const double h = std::numbers::pi / static_cast<double>(points);
  double total = 0.0;
  for (std::size_t k = 0; k < points; ++k) {
    const double th = (static_cast<double>(k) + 0.5) * h;
    const double x = c + r * std::cos(th);
    const double s = std::sin(th);
    total += g(x / psi1) * r * r * s * s / (2.0 * std::numbers::pi * psi1 * x);
  }
  total *= h;
  const double atom = std::max(0.0, 1.0 - 1.0 / psi1);
  if (atom > 0.0) total += atom * g(0.0);
  if (!std::isfinite(total)) throw NumericalError("mp_expectation: integral did not converge");
  return total;
}

Thetas theta_params(const ActivationMoments& m, double psi1, double psi2, const LabelFunction& F,
                    const TheoryOptions& options) {
  if (!(psi1 > 0.0) || !(psi2 > 0.0)) throw ConfigError("theta_params: psi1 and psi2 must be positive");
  const double g1sq = m.gamma1 * m.gamma1;
  const double g2sq = m.gamma2_sq;
  Thetas t{};
  t.theta1 = mp_expectation([&](double x) { return g1sq / (g1sq * x + g2sq); }, psi1, options.mp_points);
  t.theta2 = psi1 * mp_expectation([&](double x) { return g1sq * x / (g1sq * x + g2sq); }, psi1, options.mp_points);
  const QuadratureRule rule = normal_rule(options.normal_order);
  t.theta3 = rule.integrate([&](double x) { return x * (2.0 * F(x) - 1.0); });
  t.theta4 = 1.0 / psi2 + t.theta3 * t.theta3;
  return t;
}

void tau_of(GaussEquivParams& p) {
  p.tau0_sq = 1.0 - p.theta2;
  const double e2 = p.eta * p.eta;
  const double one_minus = 1.0 - p.theta2;
  p.tauDelta_sq = e2 * p.theta1 * one_minus * one_minus * p.theta3 * p.theta3 /
                  (1.0 + e2 * p.theta1 * one_minus * p.theta4);
  const double tsq = p.tau0_sq - p.tauDelta_sq;
  if (tsq < -1e-12) throw NumericalError("tau^2 = " + std::to_string(tsq) + " is negative");
  p.tau = std::sqrt(std::max(0.0, tsq));
}

GaussEquivParams gauss_equiv_params(double psi1, double psi2, double eta, const LabelFunction& F,
                                    const Activation& activation, const TheoryOptions& options) {
  GaussEquivParams p;
  p.psi1 = psi1;
  p.psi2 = psi2;
  p.eta = eta;
  p.moments = activation_moments(activation, options.moment_order);
  const Thetas t = theta_params(p.moments, psi1, psi2, F, options);
  p.theta1 = t.theta1;
  p.theta2 = t.theta2;
  p.theta3 = t.theta3;
  p.theta4 = t.theta4;
  tau_of(p);
  return p;
}

LabelFunction effective_label_fn(const LabelFunction& F, double tau, std::size_t order) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("effective_label_fn: tau must lie in [0, 1]");
  if (tau == 0.0) return {F.name + "-smoothed", 0.0, F.eval};
  const auto rule = std::make_shared<QuadratureRule>(normal_rule(order));
  const double a = std::sqrt(1.0 - tau * tau);
  auto base = F.eval;
  return {F.name + "-smoothed", tau, [rule, a, tau, base](double g) {
            double s = 0.0;
            for (std::size_t i = 0; i < rule->nodes.size(); ++i) s += rule->weights[i] * base(a * g + tau * rule->nodes[i]);
            return s;
          }};
}

double truncated_second_moment(double a) { return (1.0 + a * a) * normal_cdf(a) + a * normal_pdf(a); }

namespace {

// Minimizes a convex function of one variable.
double golden_section_min(const std::function<double(double)>& f, double& argmin) {
  double span = 1.0;
  const double f0 = f(0.0);
  while (f(span) <= f0 || f(-span) <= f0) {
    span *= 2.0;
    if (span > 1e6) throw NumericalError("capacity_theory: could not bracket the minimizer");
  }
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = -span, b = span;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > 1e-8) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  argmin = 0.5 * (a + b);
  return f(argmin);
}

}  // namespace

double capacity_theory(double psi1, double psi2, double eta, const LabelFunction& F, const Activation& activation,
                       const TheoryOptions& options) {
  const GaussEquivParams p = gauss_equiv_params(psi1, psi2, eta, F, activation, options);
  const LabelFunction f = effective_label_fn(F, p.tau, options.normal_order);
  const QuadratureRule rule = normal_rule(options.normal_order);
  std::vector<double> fv(rule.nodes.size());
  for (std::size_t i = 0; i < fv.size(); ++i) fv[i] = f(rule.nodes[i]);
  auto objective = [&](double c) {
    double s = 0.0;
    for (std::size_t i = 0; i < fv.size(); ++i) {
      const double g = rule.nodes[i];
      s += rule.weights[i] * (fv[i] * truncated_second_moment(-c * g) + (1.0 - fv[i]) * truncated_second_moment(c * g));
    }
    return s;
  };
  double c_opt = 0.0;
  const double m = golden_section_min(objective, c_opt);
  return 1.0 / m;
}

double accuracy_theory(double psi1, double psi2, double eta, const LabelFunction& F, const Activation& activation,
                       const TheoryOptions& options) {
  const GaussEquivParams p = gauss_equiv_params(psi1, psi2, eta, F, activation, options);
  const double g1sq = p.moments.gamma1 * p.moments.gamma1;
  const double kappa = eta * g1sq * p.theta3 /
                       std::sqrt(eta * eta * g1sq * g1sq / psi2 + g1sq + p.moments.gamma_star_sq);
  const QuadratureRule rule = normal_rule(options.normal_order);
  return rule.integrate([&](double g) {
    const double y = F(g);
    return y * normal_cdf(kappa * g) + (1.0 - y) * normal_cdf(-kappa * g);
  });
}

namespace {

enum OneStepStream : std::uint64_t { kHidden = 1, kReadout = 2, kTeacher = 3, kTrainX = 4, kTrainY = 5, kTestX = 6, kTestY = 7 };

Matrix apply(const Activation& act, const Matrix& Z) { return Z.unaryExpr([&](double z) { return act(z); }); }

Vector draw_labels(const Vector& proj, const LabelFunction& F, RngStream& rng) {
  Vector y(proj.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = rng.uniform() < F(proj[i]) ? 1.0 : -1.0;
  return y;
}

}  // namespace

OneStepResult one_step_experiment(const OneStepConfig& cfg, const LabelFunction& F, const Activation& act,
                                  const RngStream& rng) {
  if (cfg.d < 1 || !(cfg.psi1 > 0) || !(cfg.psi2 > 0)) throw ConfigError("one-step: need d >= 1 and positive psi1, psi2");
  const auto N = static_cast<std::size_t>(std::lround(cfg.psi1 * static_cast<double>(cfg.d)));
  const auto P = static_cast<std::size_t>(std::lround(cfg.psi2 * static_cast<double>(cfg.d)));
  if (N < 1 || P < 1) throw ConfigError("one-step: d * psi1 and d * psi2 must round to at least 1");
  const double init_sd = 1.0 / std::sqrt(static_cast<double>(N));

  RngStream hidden_rng = rng.substream(kHidden), readout_rng = rng.substream(kReadout), teacher_rng = rng.substream(kTeacher);
  const Matrix W0 = sample_gaussian_matrix(N, cfg.d, init_sd, hidden_rng);
  Vector a = sample_gaussian_matrix(N, 1, init_sd, readout_rng).col(0);
  Vector beta = sample_gaussian_probe(cfg.d, teacher_rng);
  beta /= beta.norm();

  RngStream xr = rng.substream(kTrainX), yr = rng.substream(kTrainY);
  const Matrix X = sample_gaussian_matrix(P, cfg.d, 1.0, xr);
  const Vector y = draw_labels(X * beta, F, yr);

  const Matrix Z = X * W0.transpose();
  const Vector residual = y - apply(act, Z) * a;
  Matrix M = Z.unaryExpr([&](double z) { return act.derivative(z); });
  M = residual.asDiagonal() * M * a.asDiagonal();
  const Matrix G = M.transpose() * X / static_cast<double>(P);

  OneStepResult out;
  out.W1 = W0 + cfg.eta * G;
  out.readout = a;
  out.teacher = beta;

  RngStream txr = rng.substream(kTestX), tyr = rng.substream(kTestY);
  const Matrix Xt = sample_gaussian_matrix(cfg.n_test, cfg.d, 1.0, txr);
  const Vector yt = draw_labels(Xt * beta, F, tyr);
  const Matrix features = apply(act, Xt * out.W1.transpose());
  const Vector score = features * a;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < yt.size(); ++i) correct += yt[i] * score[i] >= 0.0;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(cfg.n_test);

  std::vector<std::int64_t> labels(cfg.n_test);
  for (std::size_t i = 0; i < cfg.n_test; ++i) labels[i] = yt[static_cast<Eigen::Index>(i)] > 0 ? 1 : -1;
  out.features = build_ensemble(features, labels);
  return out;
}

OneStepCapacity one_step_capacity(const OneStepResult& net, const LabelFunction& F, const Activation& act,
                                  std::size_t trials, const RngStream& rng, unsigned threads) {
  if (trials < 1) throw ConfigError("one-step capacity: need at least one trial");
  const auto N = static_cast<std::size_t>(net.W1.rows());
  const auto d = static_cast<std::size_t>(net.W1.cols());
  OneStepCapacity out;
  auto p_of = [&](std::size_t P) {
    if (const auto* hit = out.curve.find(P)) return hit->p_hat;
    std::vector<char> ok(trials, 0);
    parallel_for(trials, threads, [&](std::size_t j) {
      RngStream s = rng.substream(P).substream(j);
      const Matrix X = sample_gaussian_matrix(P, d, 1.0, s);
      const Vector y = draw_labels(X * net.teacher, F, s);
      const Matrix phi = y.asDiagonal() * apply(act, X * net.W1.transpose());
      ok[j] = strictly_separable(phi).separable ? 1 : 0;
    });
    std::size_t c = 0;
    for (char v : ok) c += static_cast<std::size_t>(v);
    const double p = static_cast<double>(c) / static_cast<double>(trials);
    out.curve.add({P, p, trials});
    return p;
  };
  // invariant: p(lo) >= 0.5 > p(hi)
  std::size_t lo = std::max<std::size_t>(1, N / 2), hi = 2 * N;
  while (p_of(lo) < 0.5) {
    hi = lo;
    lo /= 2;
    if (lo == 0) throw NumericalError("one-step capacity: a single sample is not separable");
  }
  while (p_of(hi) >= 0.5) {
    lo = hi;
    hi *= 2;
    if (hi > 64 * N) throw NumericalError("one-step capacity: no separability transition below 64 N samples");
  }
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (p_of(mid) >= 0.5) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.critical_samples = lo;
  out.alpha = static_cast<double>(lo) / static_cast<double>(N);
  return out;
}

}  // namespace gluekit
