#pragma once

#include <string>

namespace gluekit {

enum class ActivationKind { Relu, CenteredRelu, Tanh, Identity };

/// Pointwise nonlinearity with its derivative (ReLU derivative at 0 is 0).
struct Activation {
  ActivationKind kind = ActivationKind::Relu;

  double operator()(double x) const;
  double derivative(double x) const;
  std::string name() const;
  /// Abscissa of a kink, if any (quadrature splits there).
  bool has_kink_at_zero() const { return kind == ActivationKind::Relu || kind == ActivationKind::CenteredRelu; }
};

/// "relu", "relu-centered", "tanh", "identity"; throws ConfigError otherwise.
Activation activation_from_name(const std::string& name);

}  // namespace gluekit
