#include <doctest.h>

#include <cmath>

#include "gluekit/error.hpp"
#include "gluekit/quadrature.hpp"
#include "gluekit/theory.hpp"

using namespace gluekit;

namespace {
const Activation kRelu{ActivationKind::Relu};
}

TEST_CASE("activation moments") {
  auto r = activation_moments(kRelu);
  CHECK(r.gamma1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.gamma2_sq == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r.gamma_star_sq == r.gamma2_sq);
  auto id = activation_moments({ActivationKind::Identity});
  CHECK(id.gamma1 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(id.gamma2_sq == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  auto c = activation_moments({ActivationKind::CenteredRelu});
  CHECK(c.gamma1 == doctest::Approx(r.gamma1).epsilon(1e-12));
  auto a = activation_moments(kRelu, 256);
  CHECK(std::abs(a.gamma1 - r.gamma1) < 1e-8);
}

TEST_CASE("Marchenko-Pastur expectations") {
  for (double psi1 : {0.5, 1.0, 2.0}) {
    CHECK(mp_expectation([](double) { return 1.0; }, psi1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mp_expectation([](double x) { return x; }, psi1) == doctest::Approx(1.0 / psi1).epsilon(1e-9));
  }
  // second moment against a sampled spectrum
  const std::size_t d = 500;
  const double psi1 = 2.0;
  const std::size_t N = static_cast<std::size_t>(psi1 * d);
  RngStream rng(1);
  Matrix W = sample_gaussian_matrix(N, d, 1.0 / std::sqrt(double(N)), rng);
  const Eigen::MatrixXd S = W.transpose() * W;  // same non-zero spectrum as W W^T
  const double mean_eig = S.trace() / double(N);
  const double second = S.squaredNorm() / double(N);
  CHECK(std::abs(mp_expectation([](double x) { return x; }, psi1) - mean_eig) / mean_eig <= 0.02);
  CHECK(std::abs(mp_expectation([](double x) { return x * x; }, psi1) - second) / second <= 0.02);
}

TEST_CASE("theta parameters") {
  const auto m = activation_moments(kRelu);
  auto t = theta_params(m, 1.0, 2.0, logistic_link(4.0));
  CHECK(t.theta2 > 0.0);
  CHECK(t.theta2 < 1.0);
  CHECK(t.theta4 - 0.5 == doctest::Approx(t.theta3 * t.theta3).epsilon(1e-12));
  CHECK(theta_params(m, 1.0, 2.0, constant_link()).theta3 == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));

  // theta3 against sampling
  RngStream rng(2);
  const int n = 1000000;
  double s = 0, s2 = 0;
  const auto F = logistic_link(4.0);
  for (int i = 0; i < n; ++i) {
    const double g = rng.normal();
    const double v = g * (2 * F(g) - 1);
    s += v;
    s2 += v * v;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(t.theta3 - mean) <= 3 * se);
}

TEST_CASE("tau algebra") {
  const auto F = logistic_link(4.0);
  auto p0 = gauss_equiv_params(1.0, 2.0, 0.0, F, kRelu);
  CHECK(p0.tauDelta_sq == 0.0);
  CHECK(p0.tau == doctest::Approx(std::sqrt(1 - p0.theta2)));
  double prev = 2.0;
  for (double eta : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    auto p = gauss_equiv_params(1.0, 2.0, eta, F, kRelu);
    CHECK(p.tau < prev);
    prev = p.tau;
  }
  auto big = gauss_equiv_params(1.0, 2.0, 1e6, F, kRelu);
  CHECK(big.tauDelta_sq == doctest::Approx((1 - big.theta2) * big.theta3 * big.theta3 / big.theta4).epsilon(1e-9));
}

TEST_CASE("effective label function") {
  const auto F = logistic_link(4.0);
  auto f0 = effective_label_fn(F, 0.0);
  for (double g : {-2.0, -0.3, 0.0, 1.1}) CHECK(std::abs(f0(g) - F(g)) <= 1e-10);
  auto f1 = effective_label_fn(F, 1.0);
  CHECK(std::abs(f1(-1.0) - f1(2.0)) <= 1e-12);
  CHECK(f1(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(effective_label_fn(F, 0.6)(0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("truncated second moment") {
  CHECK(truncated_second_moment(0.0) == doctest::Approx(0.5));
  // direct quadrature of E[(a - Z)_+^2]
  const auto rule = normal_rule(256, 14.0);
  for (double a : {-1.5, 0.3, 2.0}) {
    double s = 0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double v = std::max(a - rule.nodes[i], 0.0);
      s += rule.weights[i] * v * v;
    }
    CHECK(truncated_second_moment(a) == doctest::Approx(s).epsilon(1e-6));
  }
}

TEST_CASE("capacity and accuracy formulas") {
  const auto F = logistic_link(4.0);
  CHECK(std::abs(capacity_theory(1.0, 2.0, 0.0, constant_link(), kRelu) - 2.0) <= 1e-6);
  CHECK(std::abs(capacity_theory(1.0, 2.0, 3.0, constant_link(), kRelu) - 2.0) <= 1e-6);
  CHECK(accuracy_theory(1.0, 2.0, 0.0, F, kRelu) == doctest::Approx(0.5).epsilon(1e-12));
  double pc = 0, pa = 0;
  for (double eta : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    const double c = capacity_theory(1.0, 2.0, eta, F, kRelu);
    const double a = accuracy_theory(1.0, 2.0, eta, F, kRelu);
    if (eta > 0) {
      CHECK(c > pc);
      CHECK(a > pa);
    }
    pc = c;
    pa = a;
  }
  // quadrature convergence
  TheoryOptions hi;
  hi.normal_order = 256;
  hi.moment_order = 256;
  hi.mp_points = 8000;
  CHECK(std::abs(capacity_theory(1.0, 2.0, 1.0, F, kRelu) - capacity_theory(1.0, 2.0, 1.0, F, kRelu, hi)) < 1e-8);
  CHECK(std::abs(accuracy_theory(1.0, 2.0, 1.0, F, kRelu) - accuracy_theory(1.0, 2.0, 1.0, F, kRelu, hi)) < 1e-8);
}

TEST_CASE("one-step experiment at zero learning rate") {
  double acc = 0;
  for (int s = 0; s < 5; ++s) acc += one_step_experiment({200, 1.0, 2.0, 0.0, 4000}, logistic_link(4.0), kRelu, RngStream(s)).accuracy;
  CHECK(std::abs(acc / 5 - 0.5) <= 0.03);
  auto r = one_step_experiment({50, 1.0, 2.0, 1.0, 300}, logistic_link(4.0), kRelu, RngStream(9));
  CHECK(r.features.num_manifolds() == 2);
  CHECK(r.features.total_points() == 300);
  CHECK(r.features.ambient_dim() == 50);
}

TEST_CASE("normal quadrature rules") {
  const auto h = gauss_hermite_normal(32);
  const auto c = normal_rule(128);
  CHECK(h.integrate([](double x) { return x * x * x * x; }) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(c.integrate([](double x) { return x * x * x * x; }) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(c.integrate([](double x) { return x > 0 ? x : 0.0; }) == doctest::Approx(1.0 / std::sqrt(2 * M_PI)).epsilon(1e-13));
}
