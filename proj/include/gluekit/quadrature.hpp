#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace gluekit {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  double integrate(const std::function<double(double)>& f) const;
};

/// Expectation under N(0, 1): sum_i w_i f(x_i) with sum_i w_i = 1.
QuadratureRule gauss_hermite_normal(std::size_t order);

/// Plain integral over [a, b].
QuadratureRule gauss_legendre(std::size_t order, double a, double b);

/// Expectation under N(0, 1) by composite Gauss-Legendre on unit panels of
/// [-L, L] against the normal density. Panel edges sit on the integers, so a
/// kink at 0 is resolved; `order` / 8 nodes per panel (at least 4).
QuadratureRule normal_rule(std::size_t order, double half_width = 12.0);

double normal_cdf(double x);
double normal_pdf(double x);

}  // namespace gluekit
