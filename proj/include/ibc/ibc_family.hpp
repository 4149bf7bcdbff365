#pragma once

#include <array>
#include <cmath>
#include <string>

#include "ibc/errors.hpp"

namespace ibc {

struct RobinCheck {
  bool ok = false;
  double defect = 0.0;  // alpha*delta - beta*gamma + 1
};

inline RobinCheck validate_robin(double alpha, double beta, double gamma, double delta) {
  const double defect = alpha * delta - beta * gamma + 1.0;
  return {std::abs(defect) <= 1e-12, defect};
}

/// Boundary coupling between the line and the half-plane:
///   (alpha + beta d_y) psi2(x, 0) = (2 m g / hbar^2) psi1(x)
///   (H psi)1 contains g (gamma + delta d_y) psi2(x, 0).
/// Dirichlet type is embedded as (-1, 0, 0, 1), Neumann type as (0, 1, 1, 0).
struct IbcFamily {
  enum class Kind { dirichlet, neumann, robin };

  Kind kind = Kind::dirichlet;
  double alpha = -1.0;
  double beta = 0.0;
  double gamma = 0.0;
  double delta = 1.0;

  static IbcFamily dirichlet() { return {Kind::dirichlet, -1.0, 0.0, 0.0, 1.0}; }
  static IbcFamily neumann() { return {Kind::neumann, 0.0, 1.0, 1.0, 0.0}; }
  static IbcFamily robin(double a, double b, double c, double d) { return {Kind::robin, a, b, c, d}; }

  std::array<double, 4> coefficients() const { return {alpha, beta, gamma, delta}; }

  RobinCheck check() const { return validate_robin(alpha, beta, gamma, delta); }

  void require_valid() const {
    const auto r = check();
    if (!r.ok)
      throw ParameterError("validate_robin: alpha*delta - beta*gamma = " + std::to_string(r.defect - 1.0) +
                           " (must be -1)");
  }
};

inline std::string to_string(IbcFamily::Kind k) {
  switch (k) {
    case IbcFamily::Kind::dirichlet: return "dirichlet";
    case IbcFamily::Kind::neumann: return "neumann";
    case IbcFamily::Kind::robin: return "robin";
  }
  return "?";
}

}  // namespace ibc
