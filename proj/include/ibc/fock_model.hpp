#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "ibc/constants.hpp"
#include "ibc/eigensolvers.hpp"
#include "ibc/errors.hpp"
#include "ibc/grid.hpp"
#include "ibc/hermitian_operator.hpp"
#include "ibc/rng.hpp"
#include "ibc/sectored_state.hpp"

namespace ibc {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

inline double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

/// Sectors n = 0..n_max of bosonic y-particles around fixed sources; grid
/// assembly supports one source at the origin (s-wave, u-gauge per coordinate).
struct FockConfigSpace {
  int n_max = 1;
  GridSpec grid;
  std::vector<Vec3> sources{Vec3{}};
  std::size_t memory_cap_bytes = std::size_t{2} << 30;

  static FockConfigSpace single(int n_max, double length, double h) {
    FockConfigSpace s;
    s.n_max = n_max;
    s.grid = GridSpec::half_line(length, h);
    return s;
  }

  void validate() const {
    if (n_max < 1) throw ParameterError("n_max must be at least 1");
    if (grid.kind != GridKind::half_line) throw StructuralError("Fock sectors are built on a half-line grid");
    if (sources.empty() || sources.size() > 2) throw ParameterError("one or two sources are supported");
  }

  std::vector<GridSpec> sector_grids() const {
    std::vector<GridSpec> g;
    for (int n = 0; n <= n_max; ++n) g.push_back(GridSpec::symmetric_product(n, grid.extents[0], grid.spacing[0]));
    return g;
  }

  std::size_t dof_count() const {
    const auto m = static_cast<std::uint64_t>(grid.cells(0));
    std::size_t total = 0;
    for (int n = 0; n <= n_max; ++n) total += binomial(m + n - 1, n);
    return total;
  }

  /// Assembly footprint (triplets, compressed matrix, index tables) in bytes.
  std::size_t estimated_bytes(bool dense_coupling = false) const {
    const auto m = static_cast<std::uint64_t>(grid.cells(0)) + 1;
    double bytes = 0.0;
    for (int n = 0; n <= n_max; ++n) {
      const double size = static_cast<double>(binomial(m + n - 1, n));
      double per_row = 2.0 * n + 3.0;
      if (dense_coupling && n < n_max) per_row += 2.0 * static_cast<double>(m);
      bytes += size * (per_row * 28.0 + 64.0 + 4.0 * n);
    }
    return static_cast<std::size_t>(bytes);
  }

  void check_capacity(bool dense_coupling = false) const {
    const auto need = estimated_bytes(dense_coupling);
    if (need > memory_cap_bytes)
      throw CapacityError("Fock space needs about " + std::to_string(need >> 20) + " MiB, cap is " +
                          std::to_string(memory_cap_bytes >> 20) + " MiB");
  }
};

/// u-gauge IBC ratio for sector n: u_n(..., 0) = c_n u_{n-1}(...), c_n = -m g / (sqrt(pi) hbar^2 sqrt(n)).
inline double fock_ibc_ratio(const PhysicalConstants& k, int n) {
  return -k.mass * k.coupling / (std::sqrt(std::numbers::pi) * k.hbar * k.hbar * std::sqrt(static_cast<double>(n)));
}

namespace detail {

using Tuple = std::array<int, 8>;

inline std::span<const int> view(const Tuple& t, int n) { return {t.data(), static_cast<std::size_t>(n)}; }

/// Sorted copy of `t` (length n) with entry j replaced by v.
inline Tuple replace_sorted(std::span<const int> t, int j, int v) {
  Tuple out{};
  const int n = static_cast<int>(t.size());
  for (int i = 0; i < n; ++i) out[i] = i == j ? v : t[i];
  std::sort(out.begin(), out.begin() + n);
  return out;
}

inline Tuple insert_sorted(std::span<const int> t, int v) {
  Tuple out{};
  const int n = static_cast<int>(t.size());
  for (int i = 0; i < n; ++i) out[i] = t[i];
  out[n] = v;
  std::sort(out.begin(), out.begin() + n + 1);
  return out;
}

inline Tuple remove_one(std::span<const int> t, int v) {
  Tuple out{};
  int k = 0;
  bool removed = false;
  for (int x : t) {
    if (!removed && x == v) {
      removed = true;
      continue;
    }
    out[k++] = x;
  }
  return out;
}

struct FockLayout {
  std::vector<GridSpec> grids;
  DofMap dofs;
  int n_max = 0;
  int cells = 0;

  explicit FockLayout(const FockConfigSpace& s) : grids(s.sector_grids()), dofs(DofMap::from_grids(grids)),
                                                   n_max(s.n_max), cells(s.grid.cells(0)) {}

  long dof(int n, std::span<const int> sorted) const {
    return dofs.dof(n, grids[n].indexer->rank(sorted));
  }
};

/// Boundary tuples (containing zeros) in u-gauge: value = prod c * interior value.
inline BoundaryClosure fock_closure(const FockLayout& L, const std::vector<double>& c) {
  BoundaryClosure cl;
  for (int n = 1; n <= L.n_max; ++n) {
    const auto& ix = *L.grids[n].indexer;
    for (std::size_t r = 0; r < ix.size(); ++r) {
      auto t = ix.tuple(r);
      int z = 0;
      while (z < n && t[z] == 0) ++z;
      if (z == 0) continue;
      double coeff = 1.0;
      for (int i = 0; i < z; ++i) coeff *= c[n - i];
      const long d = L.dof(n - z, t.subspan(z));
      cl.rows.push_back({n, r, {{static_cast<std::size_t>(d), coeff}}});
    }
  }
  return cl;
}

/// Free kinetic part -(hbar^2/2m) sum_j d^2/dr_j^2 + n E0 with an odd ghost at
/// r = -h/2 and r = L + h/2 (the ghost's IBC source term is added separately).
inline void add_free_sector(OperatorBuilder& b, const FockLayout& L, int n, double kk, double e0, double extra_diag) {
  const auto& ix = *L.grids[n].indexer;
  const int top = L.cells;
  for (std::size_t r = 0; r < ix.size(); ++r) {
    auto t = ix.tuple(r);
    if (n > 0 && t[0] == 0) continue;
    const long row = L.dofs.dof(n, r);
    double diag = n * (2.0 * kk + e0) + extra_diag;
    for (int j = 0; j < n; ++j) {
      if (t[j] == 1) diag += kk;
      else b.add(row, L.dof(n, view(replace_sorted(t, j, t[j] - 1), n)), -kk);
      if (t[j] == top) diag += kk;
      else b.add(row, L.dof(n, view(replace_sorted(t, j, t[j] + 1), n)), -kk);
    }
    b.add(row, row, diag);
  }
}

}  // namespace detail

/// IBC Hamiltonian on sectors 0..n_max. Per sector n: kinetic + n E0, the
/// r_j = 0 faces eliminated through u_n(.., 0) = c_n u_{n-1}(..), and the
/// creation row g sqrt(n+1)/sqrt(4 pi) d_r u_{n+1}(.., 0) (absent for n_max).
inline HermitianOperator assemble_fock_hamiltonian(const FockConfigSpace& space, const PhysicalConstants& k) {
  space.validate();
  if (space.sources.size() != 1) throw ParameterError("grid assembly supports a single source");
  k.validate();
  space.check_capacity();
  detail::FockLayout L(space);
  const double h = space.grid.spacing[0];
  const double kk = k.kinetic_prefactor() / (h * h);
  std::vector<double> c(space.n_max + 2, 0.0);
  for (int n = 1; n <= space.n_max + 1; ++n) c[n] = fock_ibc_ratio(k, n);

  OperatorBuilder b(L.dofs);
  for (int n = 0; n <= space.n_max; ++n) {
    const double gamma = k.coupling * std::sqrt(n + 1.0) / std::sqrt(4.0 * std::numbers::pi);
    const double shift = n < space.n_max ? -2.0 * gamma * c[n + 1] / h : 0.0;
    detail::add_free_sector(b, L, n, kk, k.e0, shift);
    const auto& ix = *L.grids[n].indexer;
    for (std::size_t r = 0; r < ix.size(); ++r) {
      auto t = ix.tuple(r);
      if (n > 0 && t[0] == 0) continue;
      const long row = L.dofs.dof(n, r);
      // Ghost source: each coordinate sitting at the first cell sees 2 c_n u_{n-1}(rest).
      int ones = 0;
      while (ones < n && t[ones] == 1) ++ones;
      if (ones > 0) b.add(row, L.dof(n - 1, detail::view(detail::remove_one(t, 1), n - 1)), -2.0 * kk * c[n] * ones);
      if (n < space.n_max) b.add(row, L.dof(n + 1, detail::view(detail::insert_sorted(t, 1), n + 1)), 2.0 * gamma / h);
    }
  }
  HermitianOperator op;
  op.grids = L.grids;
  op.gauge = Gauge::u_tilde;
  op.matrix = b.build();
  op.closure = detail::fock_closure(L, c);
  op.dofs = std::move(L.dofs);
  require_hermitian(op.matrix, "Fock IBC model");
  return op;
}

/// Normalised Gaussian source profile phi(y) = (2 pi s^2)^{-3/2} exp(-|y|^2 / 2 s^2).
struct CutoffProfile {
  double width = 1.0;

  double value(double r) const {
    return std::pow(2.0 * std::numbers::pi * width * width, -1.5) * std::exp(-r * r / (2.0 * width * width));
  }
  /// sqrt(4 pi) r phi(r), the u-gauge profile.
  double reduced(double r) const { return std::sqrt(4.0 * std::numbers::pi) * r * value(r); }

  /// Spatial integral 4 pi int r^2 phi dr by composite Simpson on [0, 12 s].
  double integral(int panels = 4096) const {
    const double b = 12.0 * width, h = b / panels;
    double s = 0.0;
    for (int i = 0; i <= panels; ++i) {
      const double r = i * h;
      const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
      s += w * 4.0 * std::numbers::pi * r * r * value(r);
    }
    return s * h / 3.0;
  }
};

/// Cutoff Hamiltonian: free sectors with u(0) = 0 and creation/annihilation
/// g (a(phi) + a*(phi)). The scaled coupling entry between sector-n tuple a
/// and sector-(n+1) tuple a + {v} is g phi~(r_v) sqrt(h k_v), k_v the count of v.
inline HermitianOperator assemble_cutoff_hamiltonian(const FockConfigSpace& space, const CutoffProfile& profile,
                                                     const PhysicalConstants& k) {
  space.validate();
  if (space.sources.size() != 1) throw ParameterError("grid assembly supports a single source");
  k.validate();
  const double h = space.grid.spacing[0];
  if (!(profile.width >= 2.0 * h - 1e-12))
    throw ParameterError("cutoff width " + std::to_string(profile.width) + " is below two grid spacings");
  space.check_capacity(true);
  detail::FockLayout L(space);
  const double kk = k.kinetic_prefactor() / (h * h);
  OperatorBuilder b(L.dofs);
  for (int n = 0; n <= space.n_max; ++n) detail::add_free_sector(b, L, n, kk, k.e0, 0.0);
  SparseMatrix free = b.build();

  std::vector<double> phi(L.cells + 1, 0.0);
  for (int v = 1; v <= L.cells; ++v) phi[v] = profile.reduced(space.grid.half_node(v));
  std::vector<Triplet> trips;
  for (int n = 0; n < space.n_max; ++n) {
    const auto& ix = *L.grids[n].indexer;
    for (std::size_t r = 0; r < ix.size(); ++r) {
      auto t = ix.tuple(r);
      if (n > 0 && t[0] == 0) continue;
      const long row = L.dofs.dof(n, r);
      for (int v = 1; v <= L.cells; ++v) {
        const auto up = detail::insert_sorted(t, v);
        int kv = 0;
        for (int i = 0; i <= n; ++i) kv += up[i] == v;
        const double val = k.coupling * phi[v] * std::sqrt(h * kv);
        if (val == 0.0) continue;
        const long col = L.dof(n + 1, detail::view(up, n + 1));
        trips.emplace_back(static_cast<int>(row), static_cast<int>(col), val);
        trips.emplace_back(static_cast<int>(col), static_cast<int>(row), val);
      }
    }
  }
  SparseMatrix coupling(free.rows(), free.cols());
  coupling.setFromTriplets(trips.begin(), trips.end());
  HermitianOperator op;
  op.grids = L.grids;
  op.gauge = Gauge::u_tilde;
  op.matrix = free + coupling;
  op.matrix.makeCompressed();
  op.closure = detail::fock_closure(L, std::vector<double>(space.n_max + 1, 0.0));
  op.dofs = std::move(L.dofs);
  require_hermitian(op.matrix, "cutoff model");
  return op;
}

/// Discrete second-order self-energy -g^2 <phi~, (T + E0)^{-1} phi~> on the
/// grid; exact ground energy of the untruncated discrete van Hove model.
inline double discrete_self_energy(const GridSpec& grid, const CutoffProfile& p, const PhysicalConstants& k) {
  const double h = grid.spacing[0];
  const int n = grid.cells(0);
  const double kk = k.kinetic_prefactor() / (h * h);
  // Tridiagonal solve (T + E0) x = phi~ with odd ghosts at both ends.
  std::vector<double> diag(n), rhs(n), x(n);
  for (int j = 0; j < n; ++j) {
    diag[j] = 2.0 * kk + k.e0 + ((j == 0 || j == n - 1) ? kk : 0.0);
    rhs[j] = p.reduced(grid.half_node(j + 1));
  }
  for (int j = 1; j < n; ++j) {
    const double w = -kk / diag[j - 1];
    diag[j] -= w * -kk;
    rhs[j] -= w * rhs[j - 1];
  }
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (int j = n - 2; j >= 0; --j) x[j] = (rhs[j] + kk * x[j + 1]) / diag[j];
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += h * p.reduced(grid.half_node(j + 1)) * x[j];
  return -k.coupling * k.coupling * s;
}

/// Continuum self-energy -g^2 int |phi^(p)|^2 / (hbar^2 p^2 / 2m + E0) d^3p / (2 pi)^3
/// for the Gaussian profile, by Simpson quadrature in |p|.
inline double gaussian_self_energy(double width, const PhysicalConstants& k, int panels = 20000) {
  const double pmax = 12.0 / width, dp = pmax / panels;
  double s = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double p = i * dp;
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double ft = std::exp(-p * p * width * width);  // |phi^|^2
    s += w * 4.0 * std::numbers::pi * p * p * ft / (k.hbar * k.hbar * p * p / (2.0 * k.mass) + k.e0);
  }
  return -k.coupling * k.coupling * s * dp / 3.0 / std::pow(2.0 * std::numbers::pi, 3);
}

// ---------------------------------------------------------------------------
// Closed-form ground state.

inline double yukawa_energy(double R, const PhysicalConstants& k) {
  if (!(R > 0.0)) throw ParameterError("source separation must be positive");
  if (!(k.e0 > 0.0)) throw ParameterError("E0 must be positive");
  const double kappa = k.yukawa_rate();
  return k.coupling * k.coupling * k.mass / (std::numbers::pi * k.hbar * k.hbar) * (kappa - std::exp(-kappa * R) / R);
}

struct GroundStateSpec {
  double kappa = 0.0;
  double a = 0.0;                 // -m g / (2 pi hbar^2)
  double normalization = 0.0;     // N
  double energy = 0.0;
  std::vector<Vec3> sources;

  /// c_n = N a^n / sqrt(n!)
  double c(int n) const {
    double v = normalization;
    for (int i = 1; i <= n; ++i) v *= a / std::sqrt(static_cast<double>(i));
    return v;
  }
};

class ExactGroundState {
 public:
  ExactGroundState(const PhysicalConstants& k, std::vector<Vec3> sources) {
    if (!(k.e0 > 0.0)) throw ParameterError("E0 must be positive");
    if (sources.empty() || sources.size() > 2) throw ParameterError("one or two sources are supported");
    spec_.kappa = k.yukawa_rate();
    spec_.a = -k.ibc_coeff();
    spec_.sources = std::move(sources);
    // ||f||^2 = sum_ij (2 pi / kappa) e^{-kappa R_ij}
    double f2 = 0.0;
    for (const auto& x : spec_.sources)
      for (const auto& y : spec_.sources) f2 += 2.0 * std::numbers::pi / spec_.kappa * std::exp(-spec_.kappa * distance(x, y));
    spec_.normalization = std::exp(-0.5 * spec_.a * spec_.a * f2);
    if (spec_.sources.size() == 1) {
      spec_.energy = k.coupling * k.coupling * k.mass * spec_.kappa / (2.0 * std::numbers::pi * k.hbar * k.hbar);
    } else {
      spec_.energy = yukawa_energy(distance(spec_.sources[0], spec_.sources[1]), k);
    }
  }

  const GroundStateSpec& spec() const { return spec_; }
  double energy() const { return spec_.energy; }

  /// sum_i exp(-kappa |y - x_i|) / |y - x_i|
  double orbital(const Vec3& y) const {
    double s = 0.0;
    for (const auto& x : spec_.sources) {
      const double d = distance(y, x);
      if (d == 0.0) throw DegenerateInputError("configuration contains a source point");
      s += std::exp(-spec_.kappa * d) / d;
    }
    return s;
  }

  double operator()(std::span<const Vec3> ys) const {
    double v = spec_.c(static_cast<int>(ys.size()));
    for (const auto& y : ys) v *= orbital(y);
    return v;
  }

 private:
  GroundStateSpec spec_;
};

/// d/dr [r psi_{n+1}(ys, x + r w)] at r = 0, by a degree-4 polynomial through
/// r = delta, ..., 5 delta, averaged over the six axis directions.
inline double creation_limit(const ExactGroundState& psi, std::span<const Vec3> ys, const Vec3& x,
                             double delta = 0.02) {
  static const std::array<Vec3, 6> dirs{Vec3{1, 0, 0}, Vec3{-1, 0, 0}, Vec3{0, 1, 0},
                                        Vec3{0, -1, 0}, Vec3{0, 0, 1},  Vec3{0, 0, -1}};
  std::vector<Vec3> cfg(ys.begin(), ys.end());
  cfg.push_back(x);
  // Derivative at 0 of the interpolant through (k delta, f_k), k = 1..5, with
  // f_0 unknown: fit p(r) = sum_{m=0..4} a_m r^m and take a_1.
  Eigen::Matrix<double, 5, 5> v;
  for (int i = 0; i < 5; ++i)
    for (int m = 0; m < 5; ++m) v(i, m) = std::pow((i + 1) * delta, m);
  const Eigen::Matrix<double, 5, 5> vinv = v.inverse();
  double avg = 0.0;
  for (const auto& d : dirs) {
    Eigen::Matrix<double, 5, 1> f;
    for (int i = 0; i < 5; ++i) {
      const double r = (i + 1) * delta;
      cfg.back() = {x.x + r * d.x, x.y + r * d.y, x.z + r * d.z};
      f[i] = r * psi(cfg);
    }
    avg += (vinv * f)[1];
  }
  return avg / dirs.size();
}

/// (H psi)_n at ys from the closed form: fourth-order finite-difference
/// Laplacians, n E0, and the creation term g sqrt(n+1) sum_i d_r[r psi_{n+1}].
inline double apply_exact_hamiltonian(const ExactGroundState& psi, std::span<const Vec3> ys, const PhysicalConstants& k,
                                      double h) {
  std::vector<Vec3> cfg(ys.begin(), ys.end());
  const int n = static_cast<int>(ys.size());
  const double f0 = psi(cfg);
  double lap = 0.0;
  for (int j = 0; j < n; ++j) {
    for (int axis = 0; axis < 3; ++axis) {
      auto shifted = [&](double s) {
        auto c = cfg;
        double* comp = axis == 0 ? &c[j].x : axis == 1 ? &c[j].y : &c[j].z;
        *comp += s;
        return psi(c);
      };
      lap += (-shifted(2 * h) + 16 * shifted(h) - 30 * f0 + 16 * shifted(-h) - shifted(-2 * h)) / (12 * h * h);
    }
  }
  double creation = 0.0;
  for (const auto& x : psi.spec().sources) creation += creation_limit(psi, ys, x);
  return -k.kinetic_prefactor() * lap + n * k.e0 * f0 + k.coupling * std::sqrt(n + 1.0) * creation;
}

struct ResidualStats {
  double max_relative = 0.0;
  double mean_relative = 0.0;
  std::size_t count = 0;
};

inline ResidualStats pointwise_residual(const ExactGroundState& psi, const std::vector<std::vector<Vec3>>& configs,
                                        const PhysicalConstants& k, double h) {
  ResidualStats st;
  for (const auto& cfg : configs) {
    for (const auto& y : cfg)
      for (const auto& x : psi.spec().sources)
        if (distance(x, y) < 10.0 * h)
          throw PreconditionError("configuration point too close to a source", distance(x, y));
    const double v = psi(cfg);
    const double r = std::abs(apply_exact_hamiltonian(psi, cfg, k, h) - psi.energy() * v) / std::abs(v);
    st.max_relative = std::max(st.max_relative, r);
    st.mean_relative += r;
    ++st.count;
  }
  if (st.count) st.mean_relative /= st.count;
  return st;
}

/// `count` configurations of n points, uniform in the cube [-half, half]^3,
/// each point at least `min_dist` from every source.
inline std::vector<std::vector<Vec3>> random_configs(int n, int count, const std::vector<Vec3>& sources,
                                                     std::uint64_t seed, double half = 2.5, double min_dist = 0.3) {
  CounterRng rng(seed, static_cast<std::uint64_t>(n));
  auto u = [&]() { return half * (2.0 * rng.uniform() - 1.0); };
  std::vector<std::vector<Vec3>> out;
  while (static_cast<int>(out.size()) < count) {
    std::vector<Vec3> cfg;
    while (static_cast<int>(cfg.size()) < n) {
      const Vec3 y{u(), u(), u()};
      bool ok = true;
      for (const auto& x : sources) ok = ok && distance(x, y) >= min_dist;
      if (ok) cfg.push_back(y);
    }
    out.push_back(std::move(cfg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectra of assembled Fock operators.

struct FockEigen {
  std::vector<double> energies;
  SectoredState state;  // lowest, u-gauge, sign fixed by psi0 > 0
  int iterations = 0;
  double residual = 0.0;
  double shift = 0.0;
};

/// Lowest `nev` eigenvalues by shift-invert Lanczos. The shift starts at
/// `sigma` and is pushed down until H - sigma is positive definite.
inline FockEigen lowest_fock_eigenpairs(const HermitianOperator& h, double sigma, int nev = 1, int max_iterations = 150) {
  LanczosOptions opt;
  opt.nev = nev;
  opt.max_iterations = max_iterations;
  double shift = sigma;
  for (int attempt = 0; attempt < 30; ++attempt) {
    try {
      const auto pairs = lowest_eigenpairs(h.matrix, shift, opt);
      FockEigen out;
      out.energies = pairs.values;
      out.iterations = pairs.iterations;
      out.residual = pairs.residuals[0];
      out.shift = shift;
      out.state = h.scatter(pairs.vectors[0].cast<cplx>());
      if (out.state.sector(0)[0].real() < 0.0) out.state *= -1.0;
      return out;
    } catch (const NumericalError& e) {
      if (std::string(e.what()).find("Cholesky") == std::string::npos) throw;
      shift = shift - std::max(std::abs(shift), 1e-3);
    }
  }
  throw NumericalError("no positive-definite shift found", shift);
}

/// Lowest eigenpair of the IBC model with a positivity certificate.
inline FockEigen lowest_eigenpair(const HermitianOperator& h, const PhysicalConstants& k) {
  const double sigma = -0.1 * std::max(k.e0, 1e-3);
  auto r = lowest_fock_eigenpairs(h, sigma, 1);
  const double scale = std::max(1.0, max_abs_entry(h.matrix));
  if (r.residual > 1e-8 * scale) throw NumericalError("Ritz residual too large", r.residual);
  if (k.e0 > 0.0 && r.energies[0] < -1e-10) throw NumericalError("IBC spectrum below zero", r.energies[0]);
  return r;
}

/// Boundary ratio lim r psi_n / psi_{n-1} in psi-gauge, from quadratic
/// extrapolation of u_n(rest, r) to r = 0 (rest = first cells `anchor`).
inline double fock_boundary_ratio(const SectoredState& s, int n, int anchor) {
  const auto& g = s.grid(n);
  std::array<int, 8> t{};
  auto sample = [&](int last) {
    std::array<int, 8> u{};
    for (int i = 0; i < n - 1; ++i) u[i] = anchor;
    u[n - 1] = last;
    std::sort(u.begin(), u.begin() + n);
    return s.sector(n)[g.indexer->rank({u.data(), static_cast<std::size_t>(n)})];
  };
  const cplx u0 = (15.0 * sample(1) - 10.0 * sample(2) + 3.0 * sample(3)) / 8.0;
  for (int i = 0; i < n - 1; ++i) t[i] = anchor;
  const auto& gp = s.grid(n - 1);
  const cplx below = s.sector(n - 1)[gp.indexer->rank({t.data(), static_cast<std::size_t>(n - 1)})];
  return (u0 / below).real() / std::sqrt(4.0 * std::numbers::pi);
}

struct RenormRow {
  double width = 0.0;
  double energy = 0.0;
  double gap = 0.0;
};

struct RenormScan {
  std::vector<RenormRow> rows;
  double ibc_gap = 0.0;
  double ibc_energy = 0.0;
  double slope = 0.0;  // d log|E| / d log(1/s) over the last three widths
};

inline double loglog_slope(const std::vector<double>& inv_s, const std::vector<double>& e) {
  const std::size_t n = inv_s.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log(inv_s[i]) / n;
    my += std::log(std::abs(e[i])) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = std::log(inv_s[i]) - mx;
    sxy += dx * (std::log(std::abs(e[i])) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

inline RenormScan renormalization_scan(const std::vector<double>& widths, const FockConfigSpace& space,
                                       const PhysicalConstants& k) {
  if (!(k.e0 > 0.0)) throw ParameterError("E0 must be positive");
  RenormScan scan;
  for (double s : widths) {
    try {
      CutoffProfile p{s};
      const auto h = assemble_cutoff_hamiltonian(space, p, k);
      const double e_vh = discrete_self_energy(space.grid, p, k);
      const auto r = lowest_fock_eigenpairs(h, 1.05 * e_vh - 1e-3, 2);
      scan.rows.push_back({s, r.energies[0], r.energies[1] - r.energies[0]});
    } catch (const NumericalError& e) {
      throw NumericalError("renormalization scan at width " + std::to_string(s) + ": " + e.what(), e.residual());
    }
  }
  const auto h = assemble_fock_hamiltonian(space, k);
  const auto r = lowest_fock_eigenpairs(h, -0.1 * k.e0, 2);
  scan.ibc_energy = r.energies[0];
  scan.ibc_gap = r.energies[1] - r.energies[0];
  if (scan.rows.size() >= 3) {
    std::vector<double> x, y;
    for (std::size_t i = scan.rows.size() - 3; i < scan.rows.size(); ++i) {
      x.push_back(1.0 / scan.rows[i].width);
      y.push_back(scan.rows[i].energy);
    }
    scan.slope = loglog_slope(x, y);
  }
  return scan;
}

}  // namespace ibc
