#include "gluekit/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <gsl/gsl_integration.h>

#include "gluekit/error.hpp"

namespace gluekit {
namespace {

QuadratureRule fixed_rule(const gsl_integration_fixed_type* type, std::size_t order, double a, double b) {
  if (order < 1) throw ConfigError("quadrature order must be >= 1");
  gsl_integration_fixed_workspace* ws = gsl_integration_fixed_alloc(type, order, a, b, 0.0, 0.0);
  if (!ws) throw NumericalError("could not build a quadrature rule of order " + std::to_string(order));
  QuadratureRule rule;
  const double* x = gsl_integration_fixed_nodes(ws);
  const double* w = gsl_integration_fixed_weights(ws);
  rule.nodes.assign(x, x + order);
  rule.weights.assign(w, w + order);
  gsl_integration_fixed_free(ws);
  return rule;
}

}  // namespace

double QuadratureRule::integrate(const std::function<double(double)>& f) const {
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
  return s;
}

QuadratureRule gauss_hermite_normal(std::size_t order) {
  // weight exp(-b (x - a)^2) with a = 0, b = 1/2
  QuadratureRule rule = fixed_rule(gsl_integration_fixed_hermite, order, 0.0, 0.5);
  double total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

QuadratureRule gauss_legendre(std::size_t order, double a, double b) {
  return fixed_rule(gsl_integration_fixed_legendre, order, a, b);
}

QuadratureRule normal_rule(std::size_t order, double half_width) {
  const auto panels = static_cast<int>(std::ceil(half_width));
  const std::size_t per_panel = std::max<std::size_t>(4, order / 8);
  const QuadratureRule unit = gauss_legendre(per_panel, 0.0, 1.0);
  QuadratureRule rule;
  for (int p = -panels; p < panels; ++p) {
    for (std::size_t i = 0; i < unit.nodes.size(); ++i) {
      const double x = p + unit.nodes[i];
      rule.nodes.push_back(x);
      rule.weights.push_back(unit.weights[i] * normal_pdf(x));
    }
  }
  return rule;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace gluekit
