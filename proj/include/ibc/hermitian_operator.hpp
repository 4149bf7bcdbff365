#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Sparse>

#include "ibc/errors.hpp"
#include "ibc/sectored_state.hpp"

namespace ibc {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;
using VectorXc = Eigen::VectorXcd;

/// Reduced degrees of freedom: every (sector, node) with positive weight.
struct DofMap {
  struct Entry {
    int sector;
    std::size_t node;
  };
  std::vector<Entry> entries;
  std::vector<double> sqrt_weight;
  std::vector<std::vector<long>> index;  // [sector][node] -> dof or -1

  static DofMap from_grids(const std::vector<GridSpec>& grids) {
    DofMap m;
    m.index.resize(grids.size());
    for (std::size_t s = 0; s < grids.size(); ++s) {
      const auto w = grids[s].weights();
      m.index[s].assign(w.size(), -1);
      for (std::size_t n = 0; n < w.size(); ++n) {
        if (w[n] <= 0.0) continue;
        m.index[s][n] = static_cast<long>(m.entries.size());
        m.entries.push_back({static_cast<int>(s), n});
        m.sqrt_weight.push_back(std::sqrt(w[n]));
      }
    }
    return m;
  }

  std::size_t size() const { return entries.size(); }
  long dof(std::size_t sector, std::size_t node) const { return index[sector][node]; }
};

/// Boundary nodes are linear combinations of reduced DOF values (unscaled).
struct BoundaryClosure {
  struct Term {
    std::size_t dof;
    double coeff;
  };
  struct Row {
    int sector;
    std::size_t node;
    std::vector<Term> terms;
  };
  std::vector<Row> rows;
};

/// Sparse operator on the reduced DOF. `matrix` acts on sqrt(w) * psi, so an
/// operator that is symmetric in the weighted inner product is a symmetric
/// matrix here.
struct HermitianOperator {
  SparseMatrix matrix;
  DofMap dofs;
  BoundaryClosure closure;
  std::vector<GridSpec> grids;
  Gauge gauge = Gauge::psi;

  std::size_t dimension() const { return dofs.size(); }

  /// Scaled DOF vector sqrt(w) psi.
  VectorXc gather(const SectoredState& a) const {
    check_layout(a);
    VectorXc v(dofs.size());
    for (std::size_t k = 0; k < dofs.size(); ++k) {
      const auto& e = dofs.entries[k];
      v[k] = dofs.sqrt_weight[k] * a.sector(e.sector)[e.node];
    }
    return v;
  }

  /// Inverse of gather; boundary nodes are rebuilt from the closure.
  SectoredState scatter(const VectorXc& v) const {
    SectoredState out(grids, gauge);
    for (std::size_t k = 0; k < dofs.size(); ++k) {
      const auto& e = dofs.entries[k];
      out.sector(e.sector)[e.node] = v[k] / dofs.sqrt_weight[k];
    }
    fill_boundary(out);
    return out;
  }

  void fill_boundary(SectoredState& a) const {
    for (const auto& row : closure.rows) a.sector(row.sector)[row.node] = closure_value(a, row);
  }

  /// Largest deviation of stored boundary values from the closure.
  double ibc_residual(const SectoredState& a) const {
    check_layout(a);
    double r = 0.0;
    for (const auto& row : closure.rows)
      r = std::max(r, std::abs(a.sector(row.sector)[row.node] - closure_value(a, row)));
    return r;
  }

  void check_layout(const SectoredState& a) const {
    if (a.gauge() != gauge) throw StructuralError("gauge mismatch");
    if (a.sector_count() != grids.size()) throw StructuralError("sector count mismatch");
    for (std::size_t s = 0; s < grids.size(); ++s)
      if (!a.grid(s).same_layout(grids[s])) throw StructuralError("sector shape mismatch");
  }

 private:
  cplx closure_value(const SectoredState& a, const BoundaryClosure::Row& row) const {
    cplx v{0.0, 0.0};
    for (const auto& t : row.terms) {
      const auto& e = dofs.entries[t.dof];
      v += t.coeff * a.sector(e.sector)[e.node];
    }
    return v;
  }
};

inline double hermitian_defect(const SparseMatrix& m) {
  SparseMatrix t = m.transpose();
  SparseMatrix d = m - t;
  double r = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(d, k); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

inline double max_abs_entry(const SparseMatrix& m) {
  double r = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

/// Collects entries of H acting on unscaled psi and produces the scaled
/// matrix sqrt(w_i / w_j) H_ij.
class OperatorBuilder {
 public:
  explicit OperatorBuilder(const DofMap& dofs) : dofs_(dofs) {}

  void add(long row, long col, double value) {
    if (row < 0 || col < 0 || value == 0.0) return;
    trips_.emplace_back(static_cast<int>(row), static_cast<int>(col), value);
  }

  SparseMatrix build() const {
    const auto n = static_cast<int>(dofs_.size());
    std::vector<Triplet> scaled;
    scaled.reserve(trips_.size());
    for (const auto& t : trips_)
      scaled.emplace_back(t.row(), t.col(), t.value() * dofs_.sqrt_weight[t.row()] / dofs_.sqrt_weight[t.col()]);
    SparseMatrix m(n, n);
    m.setFromTriplets(scaled.begin(), scaled.end());
    m.makeCompressed();
    return m;
  }

 private:
  const DofMap& dofs_;
  std::vector<Triplet> trips_;
};

/// Assembly-time Hermiticity assertion. Entry magnitudes reach 1/h^2, so
/// the bound is taken relative to the largest entry when that exceeds 1.
inline void require_hermitian(const SparseMatrix& m, const char* what) {
  const double defect = hermitian_defect(m);
  const double scale = std::max(1.0, max_abs_entry(m));
  if (defect > 1e-12 * scale)
    throw NumericalError(std::string(what) + ": assembled operator is not Hermitian", defect);
}

/// Sparse matrix-vector product mapped back through the DOF map.
inline SectoredState apply_hamiltonian(const HermitianOperator& h, const SectoredState& a,
                                       double tolerance = 1e-10) {
  double scale = 0.0;
  for (std::size_t s = 0; s < a.sector_count(); ++s)
    for (const auto& z : a.sector(s)) scale = std::max(scale, std::abs(z));
  const double res = h.ibc_residual(a);
  if (res > tolerance * std::max(1.0, scale))
    throw PreconditionError("state violates the boundary condition of the operator", res);
  const VectorXc y = h.matrix * h.gather(a);
  SectoredState out(h.grids, h.gauge);
  for (std::size_t k = 0; k < h.dofs.size(); ++k) {
    const auto& e = h.dofs.entries[k];
    out.sector(e.sector)[e.node] = y[k] / h.dofs.sqrt_weight[k];
  }
  return out;
}

}  // namespace ibc
