#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "ibc/constants.hpp"
#include "ibc/eigensolvers.hpp"
#include "ibc/errors.hpp"
#include "ibc/grid.hpp"
#include "ibc/hermitian_operator.hpp"
#include "ibc/sectored_state.hpp"

namespace ibc {

/// Zero or one y-particle around a fixed source, s-wave channel, u-gauge
/// (u = sqrt(4 pi) r psi). Sector 0 is a scalar, sector 1 the half line.
struct RadialModel {
  GridSpec grid;
  PhysicalConstants constants;
  bool include_e0 = true;
  HermitianOperator op;

  /// Boundary value ratio u(0) / psi0 = -g m / (sqrt(pi) hbar^2).
  double ibc_ratio() const { return radial_ibc_ratio(constants); }

  static double radial_ibc_ratio(const PhysicalConstants& k) {
    return -k.coupling * k.mass / (std::sqrt(std::numbers::pi) * k.hbar * k.hbar);
  }
};

inline std::vector<GridSpec> radial_grids(const GridSpec& grid) {
  return {GridSpec::symmetric_product(0, grid.extents[0], grid.spacing[0]), grid};
}

inline RadialModel assemble_radial_hamiltonian(const GridSpec& grid, const PhysicalConstants& k,
                                               bool include_e0 = true) {
  if (grid.kind != GridKind::half_line) throw StructuralError("radial model needs a half-line grid");
  k.validate();
  RadialModel m;
  m.grid = grid;
  m.constants = k;
  m.include_e0 = include_e0;
  m.op.grids = radial_grids(grid);
  m.op.gauge = Gauge::u_tilde;
  m.op.dofs = DofMap::from_grids(m.op.grids);
  const auto& d = m.op.dofs;

  const double h = grid.spacing[0];
  const int n = grid.cells(0);
  const double kk = k.kinetic_prefactor() / (h * h);
  const double c = RadialModel::radial_ibc_ratio(k);
  const double g0 = k.coupling / std::sqrt(4.0 * std::numbers::pi);
  const double e0 = include_e0 ? k.e0 : 0.0;
  const long p0 = d.dof(0, 0);

  OperatorBuilder b(d);
  // Ghost at -h/2: G = 2 c psi0 - u1, so u(0) = c psi0 and u'(0) = 2 (u1 - c psi0) / h.
  b.add(p0, p0, -2.0 * g0 * c / h);
  b.add(p0, d.dof(1, 1), 2.0 * g0 / h);
  for (int j = 1; j <= n; ++j) {
    const long r = d.dof(1, j);
    double diag = 2.0 * kk + e0;
    if (j == 1) {
      diag += kk;
      b.add(r, p0, -2.0 * kk * c);
    } else {
      b.add(r, d.dof(1, j - 1), -kk);
    }
    if (j < n) b.add(r, d.dof(1, j + 1), -kk);
    else diag += kk;
    b.add(r, r, diag);
  }
  m.op.matrix = b.build();
  m.op.closure.rows.push_back({1, 0, {{static_cast<std::size_t>(p0), c}}});
  require_hermitian(m.op.matrix, "radial model");
  return m;
}

/// Sets u(0) = c psi0.
inline SectoredState make_compliant_radial(const SectoredState& a, const PhysicalConstants& k) {
  if (a.sector_count() != 2 || a.gauge() != Gauge::u_tilde) throw StructuralError("expected a u-gauge radial state");
  SectoredState out = a;
  out.sector(1)[0] = RadialModel::radial_ibc_ratio(k) * out.sector(0)[0];
  return out;
}

struct BoundStateParams {
  double kappa = 0.0;
  double energy = 0.0;
};

/// Positive root of (hbar^2/2m) kappa^2 + (g^2 m / 2 pi hbar^2) kappa - E0 = 0.
inline BoundStateParams bound_state_params(const PhysicalConstants& k) {
  if (!(k.e0 > 0.0)) throw ParameterError("no bound state: E0 must be positive");
  const double a = k.kinetic_prefactor();
  const double b = k.coupling * k.coupling * k.mass / (2.0 * std::numbers::pi * k.hbar * k.hbar);
  // Cancellation-free form of (-b + sqrt(b^2 + 4 a E0)) / 2a.
  const double kappa = 2.0 * k.e0 / (b + std::sqrt(b * b + 4.0 * a * k.e0));
  return {kappa, b * kappa};
}

struct RadialGroundState {
  double energy = 0.0;
  SectoredState state;
  int iterations = 0;
  double residual = 0.0;
};

/// Lowest eigenpair by inverse iteration with a shift below the derived energy.
inline RadialGroundState ground_state_radial(const RadialModel& m) {
  if (!m.include_e0 || !(m.constants.e0 > 0.0)) throw ParameterError("ground state needs E0 > 0 switched on");
  const auto bs = bound_state_params(m.constants);
  const double shift = bs.energy - 0.05 * (m.constants.e0 - bs.energy);
  const auto r = inverse_iteration(m.op.matrix, shift);
  RadialGroundState out;
  out.energy = r.value;
  out.iterations = r.iterations;
  out.residual = r.residual;
  VectorXc v = r.vector.cast<cplx>();
  out.state = m.op.scatter(v);
  if (out.state.sector(0)[0].real() < 0.0) out.state *= -1.0;
  return out;
}

/// Quadratic extrapolation of cell-centred samples u(h/2), u(3h/2), u(5h/2) to r = 0.
inline cplx extrapolate_to_origin(cplx u1, cplx u2, cplx u3) { return (15.0 * u1 - 10.0 * u2 + 3.0 * u3) / 8.0; }

/// Single-sector u-gauge operator with u'(0) + alpha u(0) = 0. alpha = +inf gives u(0) = 0.
inline HermitianOperator bethe_peierls_operator(const GridSpec& grid, double alpha, const PhysicalConstants& k) {
  if (grid.kind != GridKind::half_line) throw StructuralError("Bethe-Peierls operator needs a half-line grid");
  const double h = grid.spacing[0];
  const int n = grid.cells(0);
  const double kk = k.kinetic_prefactor() / (h * h);
  double ghost = -1.0;  // G = ghost * u1
  double boundary = 0.0;  // u(0) = boundary * u1
  if (std::isfinite(alpha)) {
    if (std::abs(2.0 - alpha * h) < 1e-14) throw ParameterError("alpha * h = 2 makes the boundary row singular");
    ghost = (2.0 + alpha * h) / (2.0 - alpha * h);
    boundary = 2.0 / (2.0 - alpha * h);
  }
  HermitianOperator op;
  op.grids = {grid};
  op.gauge = Gauge::u_tilde;
  op.dofs = DofMap::from_grids(op.grids);
  OperatorBuilder b(op.dofs);
  for (int j = 1; j <= n; ++j) {
    const long r = op.dofs.dof(0, j);
    double diag = 2.0 * kk;
    if (j == 1) diag -= kk * ghost;
    else b.add(r, op.dofs.dof(0, j - 1), -kk);
    if (j < n) b.add(r, op.dofs.dof(0, j + 1), -kk);
    else diag += kk;
    b.add(r, r, diag);
  }
  op.matrix = b.build();
  op.closure.rows.push_back({0, 0, {{static_cast<std::size_t>(op.dofs.dof(0, 1)), boundary}}});
  require_hermitian(op.matrix, "Bethe-Peierls operator");
  return op;
}

/// J0 = -(hbar/m) Im[conj(u(0)) u'(0)] with u'(0) = 2 (u1 - u(0)) / h; the
/// last sector of `a` must be the u-gauge half line.
inline double boundary_current(const SectoredState& a, const PhysicalConstants& k) {
  if (a.gauge() != Gauge::u_tilde) throw StructuralError("boundary current needs a u-gauge state");
  const std::size_t s = a.sector_count() - 1;
  const auto& g = a.grid(s);
  if (g.kind != GridKind::half_line) throw StructuralError("last sector must be a half line");
  const cplx b = a.sector(s)[0];
  const cplx d = 2.0 * (a.sector(s)[1] - b) / g.spacing[0];
  return -(k.hbar / k.mass) * std::imag(std::conj(b) * d);
}

/// Incoming s-wave packet u(r) = exp(-(r - r0)^2 / 4 s^2 - i k r), u(0) from the IBC.
inline SectoredState radial_packet(const RadialModel& m, double r0, double s, double kr, cplx psi0 = 0.0) {
  SectoredState a(m.op.grids, Gauge::u_tilde);
  a.sector(0)[0] = psi0;
  for (int j = 1; j <= m.grid.cells(0); ++j) {
    const double r = m.grid.half_node(j);
    a.sector(1)[j] = std::exp(cplx{-(r - r0) * (r - r0) / (4 * s * s), -kr * r});
  }
  m.op.fill_boundary(a);
  return normalize(a);
}

}  // namespace ibc
