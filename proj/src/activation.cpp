#include "gluekit/activation.hpp"

#include <cmath>
#include <numbers>

#include "gluekit/error.hpp"

namespace gluekit {

namespace {
// E[max(G, 0)] for standard normal G
const double kReluMean = 1.0 / std::sqrt(2.0 * std::numbers::pi);
}  // namespace

double Activation::operator()(double x) const {
  switch (kind) {
    case ActivationKind::Relu:
      return x > 0.0 ? x : 0.0;
    case ActivationKind::CenteredRelu:
      return (x > 0.0 ? x : 0.0) - kReluMean;
    case ActivationKind::Tanh:
      return std::tanh(x);
    case ActivationKind::Identity:
      return x;
  }
  return x;
}

double Activation::derivative(double x) const {
  switch (kind) {
    case ActivationKind::Relu:
    case ActivationKind::CenteredRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::Identity:
      return 1.0;
  }
  return 1.0;
}

std::string Activation::name() const {
  switch (kind) {
    case ActivationKind::Relu:
      return "relu";
    case ActivationKind::CenteredRelu:
      return "relu-centered";
    case ActivationKind::Tanh:
      return "tanh";
    case ActivationKind::Identity:
      return "identity";
  }
  return "relu";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return {ActivationKind::Relu};
  if (name == "relu-centered") return {ActivationKind::CenteredRelu};
  if (name == "tanh") return {ActivationKind::Tanh};
  if (name == "identity" || name == "linear") return {ActivationKind::Identity};
  throw ConfigError("unknown activation '" + name + "' (expected relu, relu-centered, tanh or identity)");
}

}  // namespace gluekit
