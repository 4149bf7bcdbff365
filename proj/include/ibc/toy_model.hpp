#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "ibc/constants.hpp"
#include "ibc/errors.hpp"
#include "ibc/grid.hpp"
#include "ibc/hermitian_operator.hpp"
#include "ibc/ibc_family.hpp"
#include "ibc/sectored_state.hpp"

namespace ibc {

/// Ghost value below y = 0 for column i: G = p * psi1(x_i) + q * psi2(x_i, h/2).
/// The boundary value is B = (G + b) / 2 and the normal derivative D = (b - G) / h.
struct GhostElimination {
  double p = 0.0;
  double q = 0.0;

  static GhostElimination make(const IbcFamily& f, const PhysicalConstants& k, double hy) {
    const double d = 2.0 * k.mass * k.coupling / (k.hbar * k.hbar);
    const double den = 0.5 * f.alpha - f.beta / hy;
    if (std::abs(den) < 1e-14 * (std::abs(f.alpha) + std::abs(f.beta) / hy))
      throw ParameterError("boundary condition is singular on this grid (alpha*h = 2*beta)");
    return {d / den, -(0.5 * f.alpha + f.beta / hy) / den};
  }

  double boundary_from_line() const { return 0.5 * p; }
  double boundary_from_interior() const { return 0.5 * (q + 1.0); }
};

struct ToyModel {
  HermitianOperator op;
  IbcFamily ibc;
  PhysicalConstants constants;
  GhostElimination ghost;

  const GridSpec& line() const { return op.grids[0]; }
  const GridSpec& plane() const { return op.grids[1]; }
};

namespace detail {

inline void require_toy_grids(const GridSpec& g1, const GridSpec& g2) {
  if (g1.kind != GridKind::line) throw StructuralError("sector 1 must be a line grid");
  if (g2.kind != GridKind::half_plane) throw StructuralError("sector 2 must be a half-plane grid");
  if (std::abs(g1.extents[0] - g2.extents[0]) > 1e-12 || std::abs(g1.spacing[0] - g2.spacing[0]) > 1e-12)
    throw StructuralError("line grid and half-plane x axis differ");
}

inline BoundaryClosure toy_closure(const GridSpec& g2, const DofMap& dofs, const GhostElimination& ge) {
  BoundaryClosure c;
  const int nx = g2.line_nodes();
  for (int i = 0; i < nx; ++i) {
    BoundaryClosure::Row row{1, g2.at(i, 0), {}};
    if (ge.boundary_from_line() != 0.0)
      row.terms.push_back({static_cast<std::size_t>(dofs.dof(0, i)), ge.boundary_from_line()});
    if (ge.boundary_from_interior() != 0.0)
      row.terms.push_back({static_cast<std::size_t>(dofs.dof(1, g2.at(i, 1))), ge.boundary_from_interior()});
    c.rows.push_back(std::move(row));
  }
  return c;
}

}  // namespace detail

/// Line (+) half-plane Hamiltonian with the y = 0 layer eliminated through the
/// IBC. `check_family = false` skips the determinant check and the Hermitian
/// assertion; it exists only to build the invalid-family negative control.
inline ToyModel assemble_toy_hamiltonian(const GridSpec& g1, const GridSpec& g2, const IbcFamily& ibc,
                                         const PhysicalConstants& k, bool check_family = true) {
  detail::require_toy_grids(g1, g2);
  k.validate();
  if (check_family) ibc.require_valid();

  ToyModel model;
  model.ibc = ibc;
  model.constants = k;
  model.op.grids = {g1, g2};
  model.op.gauge = Gauge::psi;
  model.op.dofs = DofMap::from_grids(model.op.grids);
  const auto& dofs = model.op.dofs;

  const double hx = g2.spacing[0];
  const double hy = g2.spacing[1];
  const double kx = k.kinetic_prefactor() / (hx * hx);
  const double ky = k.kinetic_prefactor() / (hy * hy);
  const int nx = g2.line_nodes();
  const int ny = g2.cells(1);
  const double g = k.coupling;
  const auto ge = GhostElimination::make(ibc, k, hy);
  model.ghost = ge;

  OperatorBuilder b(dofs);
  for (int i = 0; i < nx; ++i) {
    const long r = dofs.dof(0, i);
    b.add(r, r, 2.0 * kx + g * (0.5 * ibc.gamma * ge.p - ibc.delta * ge.p / hy));
    if (i > 0) b.add(r, dofs.dof(0, i - 1), -kx);
    if (i + 1 < nx) b.add(r, dofs.dof(0, i + 1), -kx);
    b.add(r, dofs.dof(1, g2.at(i, 1)), g * (0.5 * ibc.gamma * (ge.q + 1.0) + ibc.delta * (1.0 - ge.q) / hy));
  }
  for (int i = 0; i < nx; ++i) {
    for (int j = 1; j <= ny; ++j) {
      const long r = dofs.dof(1, g2.at(i, j));
      double diag = 2.0 * kx + 2.0 * ky;
      if (i > 0) b.add(r, dofs.dof(1, g2.at(i - 1, j)), -kx);
      if (i + 1 < nx) b.add(r, dofs.dof(1, g2.at(i + 1, j)), -kx);
      if (j + 1 <= ny) b.add(r, dofs.dof(1, g2.at(i, j + 1)), -ky);
      else diag += ky;  // wall half a cell above the last centre
      if (j == 1) {
        b.add(r, dofs.dof(0, i), -ky * ge.p);
        diag -= ky * ge.q;
      } else {
        b.add(r, dofs.dof(1, g2.at(i, j - 1)), -ky);
      }
      b.add(r, r, diag);
    }
  }
  model.op.matrix = b.build();
  model.op.closure = detail::toy_closure(g2, dofs, ge);
  if (check_family) require_hermitian(model.op.matrix, "toy model");
  return model;
}

/// Fills the y = 0 row of sector 2 from the IBC. Idempotent.
inline SectoredState make_compliant(const SectoredState& interior, const IbcFamily& ibc, const PhysicalConstants& k) {
  if (interior.sector_count() != 2) throw StructuralError("toy states have two sectors");
  const auto& g2 = interior.grid(1);
  detail::require_toy_grids(interior.grid(0), g2);
  const auto ge = GhostElimination::make(ibc, k, g2.spacing[1]);
  SectoredState out = interior;
  for (int i = 0; i < g2.line_nodes(); ++i)
    out.sector(1)[g2.at(i, 0)] =
        ge.boundary_from_line() * out.sector(0)[i] + ge.boundary_from_interior() * out.sector(1)[g2.at(i, 1)];
  return out;
}

inline SectoredState make_compliant(const SectoredState& interior, const ToyModel& m) {
  SectoredState out = interior;
  m.op.fill_boundary(out);
  return out;
}

/// Probability current. j2x / j2y live on the full sector-2 layout; row 0
/// holds the boundary value of the current, so j2y row 0 is boundary_flux.
struct CurrentField {
  std::vector<double> j1;
  std::vector<double> j2x;
  std::vector<double> j2y;
  std::vector<double> boundary_flux;
};

inline CurrentField current_fields(const SectoredState& a, const PhysicalConstants& k) {
  if (a.sector_count() != 2) throw StructuralError("toy states have two sectors");
  const auto& g2 = a.grid(1);
  detail::require_toy_grids(a.grid(0), g2);
  const double hx = g2.spacing[0];
  const double hy = g2.spacing[1];
  const int nx = g2.line_nodes();
  const int ny = g2.cells(1);
  const double c = k.hbar / k.mass;
  const auto& p1 = a.sector(0);
  const auto& p2 = a.sector(1);

  CurrentField f;
  f.j1.resize(nx);
  for (int i = 0; i < nx; ++i) {
    const cplx l = i > 0 ? p1[i - 1] : cplx{};
    const cplx r = i + 1 < nx ? p1[i + 1] : cplx{};
    f.j1[i] = c * std::imag(std::conj(p1[i]) * (r - l)) / (2.0 * hx);
  }
  f.j2x.assign(g2.size(), 0.0);
  f.j2y.assign(g2.size(), 0.0);
  f.boundary_flux.resize(nx);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j <= ny; ++j) {
      const cplx v = p2[g2.at(i, j)];
      const cplx l = i > 0 ? p2[g2.at(i - 1, j)] : cplx{};
      const cplx r = i + 1 < nx ? p2[g2.at(i + 1, j)] : cplx{};
      f.j2x[g2.at(i, j)] = c * std::imag(std::conj(v) * (r - l)) / (2.0 * hx);
      cplx dy;
      if (j == 0) {
        dy = 2.0 * (p2[g2.at(i, 1)] - v) / hy;
      } else {
        const cplx below = j == 1 ? 2.0 * p2[g2.at(i, 0)] - p2[g2.at(i, 1)] : p2[g2.at(i, j - 1)];
        const cplx above = j < ny ? p2[g2.at(i, j + 1)] : -v;
        dy = (above - below) / (2.0 * hy);
      }
      f.j2y[g2.at(i, j)] = c * std::imag(std::conj(v) * dy);
    }
    f.boundary_flux[i] = f.j2y[g2.at(i, 0)];
  }
  return f;
}

/// r(x) = (2/hbar) Im[conj(psi1) (H psi)1] + d_x j1 + j2y(x, 0).
inline std::vector<double> balance_residual(const SectoredState& a, const ToyModel& m) {
  const auto& k = m.constants;
  const SectoredState hpsi = apply_hamiltonian(m.op, a);
  const auto f = current_fields(a, k);
  const int nx = m.line().line_nodes();
  const double hx = m.line().spacing[0];
  std::vector<double> r(nx);
  for (int i = 0; i < nx; ++i) {
    const double l = i > 0 ? f.j1[i - 1] : 0.0;
    const double rr = i + 1 < nx ? f.j1[i + 1] : 0.0;
    r[i] = (2.0 / k.hbar) * std::imag(std::conj(a.sector(0)[i]) * hpsi.sector(0)[i]) + (rr - l) / (2.0 * hx) +
           f.boundary_flux[i];
  }
  return r;
}

inline double max_abs(const std::vector<double>& v) {
  double r = 0.0;
  for (double x : v) r = std::max(r, std::abs(x));
  return r;
}

/// Toy grids: line of width W and half-plane W x Ly with spacings hx, hy.
inline std::vector<GridSpec> toy_grids(double width, double height, double hx, double hy) {
  return {GridSpec::line(width, hx), GridSpec::half_plane(width, height, hx, hy)};
}

/// Gaussian packet exp(-(x-x0)^2/(4 sx^2) - (y-y0)^2/(4 sy^2) + i(kx x + ky y)) in sector 2.
inline std::vector<cplx> gaussian_plane(const GridSpec& g2, double x0, double y0, double sx, double sy, double kx,
                                        double ky) {
  std::vector<cplx> v(g2.size(), cplx{});
  for (int i = 0; i < g2.line_nodes(); ++i) {
    const double x = g2.x_node(i);
    for (int j = 1; j <= g2.cells(1); ++j) {
      const double y = g2.half_node(j, 1);
      const double e = -(x - x0) * (x - x0) / (4 * sx * sx) - (y - y0) * (y - y0) / (4 * sy * sy);
      v[g2.at(i, j)] = std::exp(cplx{e, kx * x + ky * y});
    }
  }
  return v;
}

inline std::vector<cplx> gaussian_line(const GridSpec& g1, double x0, double sx, double kx) {
  std::vector<cplx> v(g1.size());
  for (int i = 0; i < g1.line_nodes(); ++i) {
    const double x = g1.x_node(i);
    v[i] = std::exp(cplx{-(x - x0) * (x - x0) / (4 * sx * sx), kx * x});
  }
  return v;
}

/// Initial toy state: a sector-2 packet, an optional sector-1 Gaussian, and an
/// optional boundary layer psi2 = b psi1(x) exp(-y^2/4s^2 + i k y) whose y -> 0
/// limit matches the boundary row b psi1 of the family, so the data carry no
/// grid-scale jump. Boundary rows are then filled and the state normalised.
struct ToyScenario {
  double x0 = 0.0, y0 = 3.0, sx = 0.7, sy = 0.7, kx = 0.0, ky = -4.0;
  double packet_amp = 1.0;
  double line_sx = 0.0;  // 0: no sector-1 part
  double layer_s = 0.0;  // 0: no boundary layer
  double layer_k = 0.0;
};

inline SectoredState toy_initial_state(const ToyModel& m, const ToyScenario& sc) {
  SectoredState s(m.op.grids, Gauge::psi);
  const auto& g1 = m.line();
  const auto& g2 = m.plane();
  if (sc.packet_amp != 0.0) {
    s.sector(1) = gaussian_plane(g2, sc.x0, sc.y0, sc.sx, sc.sy, sc.kx, sc.ky);
    for (auto& z : s.sector(1)) z *= sc.packet_amp;
  }
  if (sc.line_sx > 0.0) s.sector(0) = gaussian_line(g1, sc.x0, sc.line_sx, 0.0);
  if (sc.layer_s > 0.0) {
    const double b = m.ghost.boundary_from_line();
    for (int i = 0; i < g2.line_nodes(); ++i)
      for (int j = 1; j <= g2.cells(1); ++j) {
        const double y = g2.half_node(j, 1);
        s.sector(1)[g2.at(i, j)] += b * s.sector(0)[i] * std::exp(cplx{-y * y / (4 * sc.layer_s * sc.layer_s), sc.layer_k * y});
      }
  }
  return normalize(make_compliant(s, m));
}

/// Largest density within `band` nodes of any outer wall, relative to the peak.
inline double wall_density(const SectoredState& a, int band = 5) {
  const auto& g2 = a.grid(1);
  const int nx = g2.line_nodes();
  const int ny = g2.cells(1);
  double peak = 0.0, edge = 0.0;
  for (int i = 0; i < nx; ++i) {
    const double d = std::norm(a.sector(0)[i]);
    peak = std::max(peak, d);
    if (i < band || i >= nx - band) edge = std::max(edge, d);
    for (int j = 1; j <= ny; ++j) {
      const double e = std::norm(a.sector(1)[g2.at(i, j)]);
      peak = std::max(peak, e);
      if (i < band || i >= nx - band || j > ny - band) edge = std::max(edge, e);
    }
  }
  return peak > 0.0 ? edge / peak : 0.0;
}

}  // namespace ibc
