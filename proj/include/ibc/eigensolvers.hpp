#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "ibc/errors.hpp"
#include "ibc/hermitian_operator.hpp"

namespace ibc {

struct EigenPairs {
  std::vector<double> values;           // ascending
  std::vector<Eigen::VectorXd> vectors;  // unit 2-norm, scaled coordinates
  std::vector<double> residuals;         // ||H x - lambda x||
  int iterations = 0;
};

struct LanczosOptions {
  int nev = 1;
  int max_iterations = 120;
  double tolerance = 1e-11;  // relative Ritz residual
  std::uint64_t seed = 0x5eed;
};

using LinearOp = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Lanczos with full reorthogonalisation on a symmetric operator `op`,
/// returning the `nev` algebraically largest Ritz pairs.
inline EigenPairs lanczos_largest(const LinearOp& op, Eigen::Index n, const LanczosOptions& opt) {
  const int m_max = static_cast<int>(std::min<Eigen::Index>(opt.max_iterations, n));
  const int nev = std::min<int>(opt.nev, m_max);
  Eigen::MatrixXd v(n, m_max + 1);
  std::vector<double> alpha, beta;
  {
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> d(0.0, 1.0);
    Eigen::VectorXd v0(n);
    for (Eigen::Index i = 0; i < n; ++i) v0[i] = d(rng);
    v.col(0) = v0 / v0.norm();
  }
  Eigen::VectorXd w(n);
  EigenPairs out;
  for (int j = 0; j < m_max; ++j) {
    op(v.col(j), w);
    const double a = v.col(j).dot(w);
    alpha.push_back(a);
    // Two passes of classical Gram-Schmidt against the whole basis.
    for (int pass = 0; pass < 2; ++pass) {
      const Eigen::VectorXd c = v.leftCols(j + 1).transpose() * w;
      w.noalias() -= v.leftCols(j + 1) * c;
    }
    const double b = w.norm();
    const int m = j + 1;
    bool done = (b < 1e-14 * std::abs(a)) || m == m_max;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    if (m >= nev) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        t(i, i) = alpha[i];
        if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
      }
      tri.compute(t);
      bool converged = true;
      for (int k = 0; k < nev; ++k) {
        const double theta = tri.eigenvalues()[m - 1 - k];
        const double est = std::abs(b * tri.eigenvectors()(m - 1, m - 1 - k));
        if (est > opt.tolerance * std::abs(theta)) converged = false;
      }
      done = done || converged;
    }
    if (done) {
      if (m < nev) throw NumericalError("Lanczos basis exhausted before nev pairs", b);
      for (int k = 0; k < nev; ++k) {
        out.values.push_back(tri.eigenvalues()[m - 1 - k]);
        Eigen::VectorXd x = v.leftCols(m) * tri.eigenvectors().col(m - 1 - k);
        out.vectors.push_back(x / x.norm());
        out.residuals.push_back(std::abs(b * tri.eigenvectors()(m - 1, m - 1 - k)));
      }
      out.iterations = m;
      return out;
    }
    beta.push_back(b);
    v.col(j + 1) = w / b;
  }
  throw NumericalError("Lanczos did not converge");
}

/// Lowest eigenpairs of a symmetric sparse matrix by shift-invert Lanczos;
/// the shift must lie below the spectrum so that H - sigma is positive
/// definite (sparse Cholesky, AMD ordering). Residuals are recomputed on H itself.
inline EigenPairs lowest_eigenpairs(const SparseMatrix& h, double sigma, const LanczosOptions& opt = {}) {
  using Col = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  Col a = h;
  Col id(a.rows(), a.cols());
  id.setIdentity();
  a -= sigma * id;
  Eigen::SimplicialLLT<Col, Eigen::Lower, Eigen::AMDOrdering<int>> llt;
  llt.compute(a);
  if (llt.info() != Eigen::Success)
    throw NumericalError("shift is not below the spectrum (Cholesky failed)", sigma);
  LinearOp op = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = llt.solve(x); };
  EigenPairs inv = lanczos_largest(op, a.rows(), opt);
  EigenPairs out;
  out.iterations = inv.iterations;
  for (std::size_t k = 0; k < inv.values.size(); ++k) {
    const double lambda = sigma + 1.0 / inv.values[k];
    Eigen::VectorXd r = h * inv.vectors[k] - lambda * inv.vectors[k];
    out.values.push_back(lambda);
    out.vectors.push_back(inv.vectors[k]);
    out.residuals.push_back(r.norm());
  }
  std::vector<std::size_t> order(out.values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return out.values[x] < out.values[y]; });
  EigenPairs sorted;
  sorted.iterations = out.iterations;
  for (auto i : order) {
    sorted.values.push_back(out.values[i]);
    sorted.vectors.push_back(out.vectors[i]);
    sorted.residuals.push_back(out.residuals[i]);
  }
  return sorted;
}

struct InverseIterationResult {
  double value = 0.0;
  Eigen::VectorXd vector;
  double residual = 0.0;
  int iterations = 0;
};

/// Shifted inverse iteration; converges to the eigenvalue closest to `shift`.
inline InverseIterationResult inverse_iteration(const SparseMatrix& h, double shift, int max_iterations = 500,
                                                double tolerance = 1e-12, std::uint64_t seed = 0x5eed) {
  using Col = Eigen::SparseMatrix<double, Eigen::ColMajor>;
  Col a = h;
  Col id(a.rows(), a.cols());
  id.setIdentity();
  a -= shift * id;
  Eigen::SparseLU<Col> lu;
  lu.compute(a);
  if (lu.info() != Eigen::Success) throw NumericalError("shifted matrix is singular", shift);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd x(a.rows());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = d(rng);
  x /= x.norm();
  const double scale = std::max(1.0, max_abs_entry(h));
  InverseIterationResult out;
  for (int it = 1; it <= max_iterations; ++it) {
    Eigen::VectorXd y = lu.solve(x);
    x = y / y.norm();
    const Eigen::VectorXd hx = h * x;
    const double lambda = x.dot(hx);
    const double res = (hx - lambda * x).norm();
    out = {lambda, x, res, it};
    if (res <= tolerance * scale) return out;
  }
  throw NumericalError("inverse iteration did not converge", out.residual);
}

}  // namespace ibc
