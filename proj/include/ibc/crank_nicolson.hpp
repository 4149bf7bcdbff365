#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include <Eigen/SparseLU>

#include "ibc/errors.hpp"
#include "ibc/hermitian_operator.hpp"
#include "ibc/sectored_state.hpp"

namespace ibc {

using SparseMatrixC = Eigen::SparseMatrix<cplx, Eigen::ColMajor>;

/// (1 + i dt H / 2 hbar) psi_{n+1} = (1 - i dt H / 2 hbar) psi_n, factorised once.
class CrankNicolson {
 public:
  CrankNicolson(const HermitianOperator& h, double dt, double hbar = 1.0) : h_(h), dt_(dt) {
    if (!(dt > 0.0)) throw ParameterError("time step must be positive");
    const auto n = static_cast<Eigen::Index>(h.dimension());
    SparseMatrixC hc = h.matrix.cast<cplx>();
    SparseMatrixC id(n, n);
    id.setIdentity();
    const cplx a{0.0, dt / (2.0 * hbar)};
    lhs_ = id + a * hc;
    rhs_ = id - a * hc;
    lhs_.makeCompressed();
    lu_.analyzePattern(lhs_);
    lu_.factorize(lhs_);
    if (lu_.info() != Eigen::Success) throw NumericalError("Crank-Nicolson factorisation failed");
  }

  double dt() const { return dt_; }
  const HermitianOperator& op() const { return h_; }

  /// One step on the scaled DOF vector.
  void step(VectorXc& v) const {
    const VectorXc b = rhs_ * v;
    VectorXc x = lu_.solve(b);
    if (lu_.info() != Eigen::Success) throw NumericalError("Crank-Nicolson solve failed");
    const double res = (lhs_ * x - b).norm() / std::max(b.norm(), 1e-300);
    if (!(res <= 1e-10)) throw NumericalError("Crank-Nicolson solve residual too large", res);
    v = std::move(x);
  }

 private:
  HermitianOperator h_;
  double dt_;
  SparseMatrixC lhs_;
  SparseMatrixC rhs_;
  Eigen::SparseLU<SparseMatrixC> lu_;
};

/// Per-sector probabilities of a scaled DOF vector (the boundary carries no weight).
inline std::vector<double> dof_probabilities(const HermitianOperator& h, const VectorXc& v) {
  std::vector<double> p(h.grids.size(), 0.0);
  for (std::size_t k = 0; k < h.dofs.size(); ++k) p[h.dofs.entries[k].sector] += std::norm(v[k]);
  return p;
}

struct EvolutionRecord {
  std::vector<double> t;
  std::vector<std::vector<double>> p;  // [time][sector]
  std::vector<double> norm;
};

/// Evolves `steps` steps, calling `observer(step, state)` at step 0 and every
/// `stride` steps (and at the end).
inline SectoredState evolve_crank_nicolson(const HermitianOperator& h, const SectoredState& a, double dt, int steps,
                                           double hbar = 1.0, EvolutionRecord* record = nullptr, int stride = 1,
                                           const std::function<void(int, const SectoredState&)>& observer = {}) {
  if (steps < 0) throw ParameterError("negative step count");
  const double n0 = norm2(a);
  if (std::abs(n0 - 1.0) > 1e-10) throw PreconditionError("initial state is not normalised", std::sqrt(n0));
  CrankNicolson cn(h, dt, hbar);
  VectorXc v = h.gather(a);
  auto emit = [&](int s) {
    if (record) {
      const auto p = dof_probabilities(h, v);
      double tot = 0.0;
      for (double x : p) tot += x;
      record->t.push_back(s * dt);
      record->p.push_back(p);
      record->norm.push_back(tot);
    }
    if (observer) observer(s, h.scatter(v));
  };
  emit(0);
  for (int s = 1; s <= steps; ++s) {
    cn.step(v);
    if (s % stride == 0 || s == steps) emit(s);
  }
  return h.scatter(v);
}

}  // namespace ibc
