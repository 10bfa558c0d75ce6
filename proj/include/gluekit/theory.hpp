#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "gluekit/activation.hpp"
#include "gluekit/model.hpp"
#include "gluekit/rng.hpp"
#include "gluekit/sim_capacity.hpp"

namespace gluekit {

/// Probability that P generic points in R^N are separable under a random labeling.
double cover_prob(std::size_t N, std::size_t P);

struct ActivationMoments {
  double gamma1 = 0.0;
  double gamma2_sq = 0.0;
  /// Residual variance of the linearized features; taken equal to gamma2_sq.
  double gamma_star_sq = 0.0;
};

/// Teacher link F: R -> [0, 1], P(y = +1 | <beta, x> = g) = F(g).
struct LabelFunction {
  std::string name;
  double param = 0.0;
  std::function<double(double)> eval;

  double operator()(double g) const { return eval(g); }
};

LabelFunction logistic_link(double slope);
LabelFunction constant_link(double value = 0.5);
LabelFunction sign_link();

struct GaussEquivParams {
  double psi1 = 1.0;
  double psi2 = 1.0;
  double eta = 0.0;
  ActivationMoments moments;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
  double theta4 = 0.0;
  double tau0_sq = 0.0;
  double tauDelta_sq = 0.0;
  double tau = 0.0;
};

struct TheoryOptions {
  std::size_t normal_order = 128;
  std::size_t moment_order = 128;
  std::size_t mp_points = 4000;
};

ActivationMoments activation_moments(const Activation& activation, std::size_t quadrature_order = 128);

/// E[g(X)] where X is distributed as the limiting spectrum of W0 W0^T (W0 is
/// N x d with N(0, 1/N) entries, psi1 = N/d), including the atom at zero.
double mp_expectation(const std::function<double(double)>& g, double psi1, std::size_t points = 4000);

struct Thetas {
  double theta1, theta2, theta3, theta4;
};

Thetas theta_params(const ActivationMoments& moments, double psi1, double psi2, const LabelFunction& F,
                    const TheoryOptions& options = {});

/// Fills tau0_sq, tauDelta_sq and tau from the theta block.
void tau_of(GaussEquivParams& params);

GaussEquivParams gauss_equiv_params(double psi1, double psi2, double eta, const LabelFunction& F,
                                    const Activation& activation, const TheoryOptions& options = {});

/// f_tau(g) = E_G'[F(sqrt(1 - tau^2) g + tau G')].
LabelFunction effective_label_fn(const LabelFunction& F, double tau, std::size_t order = 128);

/// E_Z[(a - Z)_+^2] for standard normal Z.
double truncated_second_moment(double a);

double capacity_theory(double psi1, double psi2, double eta, const LabelFunction& F, const Activation& activation,
                       const TheoryOptions& options = {});

double accuracy_theory(double psi1, double psi2, double eta, const LabelFunction& F, const Activation& activation,
                       const TheoryOptions& options = {});

struct OneStepConfig {
  std::size_t d = 400;
  double psi1 = 1.0;
  double psi2 = 2.0;
  double eta = 0.0;
  std::size_t n_test = 4000;
};

struct OneStepResult {
  double accuracy = 0.0;
  /// Post-step test features sigma(W1 x), grouped by label (-1, +1).
  ManifoldEnsemble features;
  Matrix W1;
  Vector readout;
  Vector teacher;
};

/// One full-batch gradient step on the hidden layer of a random 2-layer net,
/// then sign-readout accuracy on fresh samples.
OneStepResult one_step_experiment(const OneStepConfig& config, const LabelFunction& F, const Activation& activation,
                                  const RngStream& rng);

struct OneStepCapacity {
  double alpha = 0.0;
  std::size_t critical_samples = 0;
  ProbCurve curve;  // n holds the sample count P
};

/// Storage capacity of the post-step features: largest number of fresh
/// teacher-labeled samples that stay separable with probability >= 1/2, over N.
OneStepCapacity one_step_capacity(const OneStepResult& net, const LabelFunction& F, const Activation& activation,
                                  std::size_t trials, const RngStream& rng, unsigned threads = 1);

}  // namespace gluekit
