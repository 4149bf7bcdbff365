#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "ibc/errors.hpp"

namespace ibc {

/// hbar, particle mass, coupling g and creation energy E0.
///
/// Only |g| is kept: a complex coupling is unitarily equivalent to its modulus
/// (rephase the higher sector by g/|g|), so `coupling_phase` is bookkeeping and
/// never enters an operator.
struct PhysicalConstants {
  double hbar = 1.0;
  double mass = 1.0;
  double coupling = 1.0;
  double e0 = 0.0;
  double coupling_phase = 0.0;

  static PhysicalConstants make(double hbar, double mass, double coupling, double e0 = 0.0) {
    PhysicalConstants k;
    k.hbar = hbar;
    k.mass = mass;
    k.coupling = std::abs(coupling);
    k.coupling_phase = coupling < 0 ? std::numbers::pi : 0.0;
    k.e0 = e0;
    k.validate();
    return k;
  }

  static PhysicalConstants make(double hbar, double mass, std::complex<double> coupling, double e0) {
    PhysicalConstants k = make(hbar, mass, std::abs(coupling), e0);
    k.coupling_phase = std::arg(coupling);
    return k;
  }

  void validate() const {
    if (!(hbar > 0.0) || !std::isfinite(hbar)) throw ParameterError("hbar must be positive");
    if (!(mass > 0.0) || !std::isfinite(mass)) throw ParameterError("mass must be positive");
    if (!(coupling >= 0.0) || !std::isfinite(coupling)) throw ParameterError("coupling must be finite");
    if (!(e0 >= 0.0) || !std::isfinite(e0)) throw ParameterError("e0 must be non-negative");
  }

  /// m g / (2 pi hbar^2): modulus of the radial IBC amplitude ratio.
  double ibc_coeff() const { return mass * coupling / (2.0 * std::numbers::pi * hbar * hbar); }

  /// hbar^2 / (2m)
  double kinetic_prefactor() const { return hbar * hbar / (2.0 * mass); }

  /// sqrt(2 m E0) / hbar, the decay rate of a free particle at energy -E0.
  double yukawa_rate() const { return std::sqrt(2.0 * mass * e0) / hbar; }
};

}  // namespace ibc
