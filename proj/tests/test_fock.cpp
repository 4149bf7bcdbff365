#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ibc/fock_model.hpp"
#include "ibc/radial_creation.hpp"

using namespace ibc;

namespace {

const PhysicalConstants kUnit = PhysicalConstants::make(1.0, 1.0, 1.0, 0.5);
const PhysicalConstants kWeak = PhysicalConstants::make(1.0, 1.0, 0.3, 0.5);

double emin_oracle(const PhysicalConstants& k) {
  return k.coupling * k.coupling * k.mass * std::sqrt(2 * k.mass * k.e0) / (2 * std::numbers::pi * k.hbar * k.hbar * k.hbar);
}

std::vector<std::vector<Vec3>> sample_configs(int n, int count, const std::vector<Vec3>& sources, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.5, 2.5);
  std::vector<std::vector<Vec3>> out;
  while (static_cast<int>(out.size()) < count) {
    std::vector<Vec3> cfg;
    while (static_cast<int>(cfg.size()) < n) {
      Vec3 y{u(rng), u(rng), u(rng)};
      bool ok = true;
      for (const auto& x : sources) ok = ok && distance(x, y) >= 0.3;
      if (ok) cfg.push_back(y);
    }
    out.push_back(cfg);
  }
  return out;
}

long tuple_dof(const HermitianOperator& h, int n, std::vector<int> t) {
  std::sort(t.begin(), t.end());
  return h.dofs.dof(n, h.grids[n].indexer->rank(t));
}

}  // namespace

TEST(FockAssembly, SingleParticleTruncationEqualsRadialModel) {
  for (const auto& k : {kUnit, PhysicalConstants::make(0.7, 1.4, 2.1, 0.3)}) {
    const auto grid = GridSpec::half_line(6.0, 0.125);
    auto space = FockConfigSpace::single(1, 6.0, 0.125);
    const auto f = assemble_fock_hamiltonian(space, k);
    const auto r = assemble_radial_hamiltonian(grid, k);
    ASSERT_EQ(f.dimension(), r.op.dimension());
    const SparseMatrix diff = f.matrix - r.op.matrix;
    EXPECT_LE(max_abs_entry(diff), 1e-13 * max_abs_entry(r.op.matrix));
  }
}

TEST(FockAssembly, ZeroCouplingIsBlockDiagonal) {
  const auto k0 = PhysicalConstants::make(1.0, 1.0, 0.0, 0.5);
  const auto h = assemble_fock_hamiltonian(FockConfigSpace::single(3, 2.0, 0.25), k0);
  for (int r = 0; r < h.matrix.rows(); ++r)
    for (SparseMatrix::InnerIterator it(h.matrix, r); it; ++it)
      EXPECT_EQ(h.dofs.entries[r].sector, h.dofs.entries[it.col()].sector);
  // Sector 2, both coordinates in the first cell: 2 * (3K) + 2 E0.
  const double kk = 0.5 / (0.25 * 0.25);
  const long d = tuple_dof(h, 2, {1, 1});
  EXPECT_DOUBLE_EQ(h.matrix.coeff(d, d), 6 * kk + 1.0);
}

TEST(FockAssembly, HermitianWithGeneralConstants) {
  const auto k = PhysicalConstants::make(0.9, 1.3, 1.7, 0.4);
  const auto h = assemble_fock_hamiltonian(FockConfigSpace::single(3, 3.0, 0.125), k);
  EXPECT_LE(hermitian_defect(h.matrix), 1e-12 * std::max(1.0, max_abs_entry(h.matrix)));
}

TEST(FockAssembly, BoundaryClosureFollowsSqrtNRecursion) {
  const auto h = assemble_fock_hamiltonian(FockConfigSpace::single(2, 2.0, 0.25), kUnit);
  SectoredState s(h.grids, Gauge::u_tilde);
  s.sector(0)[0] = 0.9;
  for (std::size_t i = 0; i < s.sector(1).size(); ++i) s.sector(1)[i] = 0.1 * i + 0.3;
  h.fill_boundary(s);
  const double c1 = -1.0 / std::sqrt(std::numbers::pi), c2 = c1 / std::sqrt(2.0);
  EXPECT_NEAR(s.sector(1)[0].real(), c1 * 0.9, 1e-15);
  const auto& ix = *h.grids[2].indexer;
  const std::vector<int> corner{0, 0}, edge{0, 5};
  EXPECT_NEAR(s.sector(2)[ix.rank(corner)].real(), c2 * c1 * 0.9, 1e-15);
  EXPECT_NEAR(s.sector(2)[ix.rank(edge)].real(), c2 * s.sector(1)[5].real(), 1e-15);
}

TEST(FockAssembly, CapacityAndStructureErrors) {
  auto space = FockConfigSpace::single(3, 8.0, 1.0 / 64);
  space.memory_cap_bytes = 1 << 20;
  EXPECT_THROW(assemble_fock_hamiltonian(space, kUnit), CapacityError);
  auto two = FockConfigSpace::single(2, 2.0, 0.25);
  two.sources.push_back({0, 0, 2});
  EXPECT_THROW(assemble_fock_hamiltonian(two, kUnit), ParameterError);
  EXPECT_THROW(FockConfigSpace::single(0, 2.0, 0.25).validate(), ParameterError);
}

TEST(ExactGroundState, EnergyAndCoefficients) {
  const ExactGroundState unit(kUnit, {Vec3{}});
  EXPECT_NEAR(unit.energy(), 1.0 / (2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(ExactGroundState(kWeak, {Vec3{}}).energy(), 0.014324, 5e-7);
  EXPECT_NEAR(ExactGroundState(kWeak, {Vec3{}}).energy(), emin_oracle(kWeak), 1e-16);
  const auto& sp = unit.spec();
  EXPECT_NEAR(sp.c(1) / sp.c(0), -1.0 / (2 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(sp.c(2) / sp.c(1), -1.0 / (2 * std::numbers::pi * std::sqrt(2.0)), 1e-15);
  // Unit norm: sum_n c_n^2 ||f||^2n with ||f||^2 from a radial quadrature.
  const double kappa = sp.kappa;
  double f2 = 0.0;
  const int panels = 200000;
  const double b = 60.0 / kappa, dr = b / panels;
  for (int i = 0; i <= panels; ++i) {
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    f2 += w * 4 * std::numbers::pi * std::exp(-2 * kappa * i * dr);
  }
  f2 *= dr / 3;
  double total = 0.0;
  for (int n = 0; n < 30; ++n) total += sp.c(n) * sp.c(n) * std::pow(f2, n);
  EXPECT_NEAR(total, 1.0, 1e-10);
  EXPECT_THROW(ExactGroundState(PhysicalConstants::make(1, 1, 1, 0.0), {Vec3{}}), ParameterError);
}

TEST(ExactGroundState, PointwiseEigenIdentitySingleSource) {
  const ExactGroundState psi(kUnit, {Vec3{}});
  const std::vector<std::vector<Vec3>> empty{{}};
  EXPECT_LE(pointwise_residual(psi, empty, kUnit, 1e-3).max_relative, 1e-6);
  for (int n : {1, 2}) {
    const auto st = pointwise_residual(psi, sample_configs(n, 50, psi.spec().sources, 17 + n), kUnit, 1e-3);
    EXPECT_LE(st.max_relative, 1e-5) << "n = " << n;
  }
}

TEST(ExactGroundState, PointwiseEigenIdentityTwoSources) {
  const std::vector<Vec3> src{{0, 0, -1}, {0, 0, 1}};
  const ExactGroundState psi(kUnit, src);
  EXPECT_NEAR(psi.energy(), (1 - std::exp(-2.0) / 2) / std::numbers::pi, 1e-15);
  const std::vector<std::vector<Vec3>> empty{{}};
  EXPECT_LE(pointwise_residual(psi, empty, kUnit, 1e-3).max_relative, 1e-6);
  for (int n : {1, 2}) {
    const auto st = pointwise_residual(psi, sample_configs(n, 50, src, 29 + n), kUnit, 1e-3);
    EXPECT_LE(st.max_relative, 1e-5) << "n = " << n;
  }
}

TEST(ExactGroundState, ResidualDetectsWrongEnergyAndCloseConfigs) {
  const ExactGroundState psi(kUnit, {Vec3{}});
  const std::vector<std::vector<Vec3>> close{{Vec3{0.005, 0, 0}}};
  EXPECT_THROW(pointwise_residual(psi, close, kUnit, 1e-3), PreconditionError);
  // A perturbed coupling in the operator breaks the identity.
  const auto k2 = PhysicalConstants::make(1.0, 1.0, 1.1, 0.5);
  const auto st = pointwise_residual(psi, sample_configs(1, 5, psi.spec().sources, 3), k2, 1e-3);
  EXPECT_GE(st.max_relative, 1e-2);
}

TEST(Yukawa, ClosedFormValues) {
  // Formula evaluated directly: 0.2967706..., 0.2012102...
  EXPECT_NEAR(yukawa_energy(2.0, kUnit), (1 - std::exp(-2.0) / 2) / std::numbers::pi, 1e-15);
  EXPECT_NEAR(yukawa_energy(1.0, kUnit), (1 - std::exp(-1.0)) / std::numbers::pi, 1e-15);
  EXPECT_NEAR(yukawa_energy(1e6, kUnit), 0.318310, 1e-6);
  double prev = yukawa_energy(0.1, kUnit);
  for (double r = 0.2; r < 10; r += 0.1) {
    const double e = yukawa_energy(r, kUnit);
    EXPECT_GT(e, prev);
    prev = e;
  }
  EXPECT_THROW(yukawa_energy(0.0, kUnit), ParameterError);
  EXPECT_THROW(yukawa_energy(-1.0, kUnit), ParameterError);
}

TEST(FockGroundState, MatchesClosedFormOnCoarseGrid) {
  const auto h = assemble_fock_hamiltonian(FockConfigSpace::single(2, 8.0, 1.0 / 32), kWeak);
  const auto r = lowest_eigenpair(h, kWeak);
  const double emin = emin_oracle(kWeak);
  EXPECT_LE(std::abs(r.energies[0] - emin), 0.01 * emin);
  EXPECT_GE(r.energies[0], -1e-10);
  const double a = -kWeak.coupling / (2 * std::numbers::pi);
  EXPECT_NEAR(fock_boundary_ratio(r.state, 1, 0), a, 1e-4);
  EXPECT_NEAR(fock_boundary_ratio(r.state, 2, 32), a / std::sqrt(2.0), 1e-4);
}

// Adding a sector changes the rows of the old top sector (creation row and its
// diagonal shift), so the truncations are not nested; the lowest eigenvalue
// climbs towards the closed form from below.
TEST(FockGroundState, TruncationSequenceApproachesClosedForm) {
  std::vector<double> e;
  for (int n = 1; n <= 3; ++n) {
    const auto h = assemble_fock_hamiltonian(FockConfigSpace::single(n, 4.0, 1.0 / 8), kWeak);
    e.push_back(lowest_eigenpair(h, kWeak).energies[0]);
  }
  EXPECT_LT(e[0], e[1]);
  EXPECT_LT(e[1], e[2]);
  const double emin = emin_oracle(kWeak);
  EXPECT_GT(std::abs(e[0] - emin), std::abs(e[2] - emin));
}

TEST(CutoffModel, ProfileAndResolution) {
  for (double s : {0.1, 0.5, 2.0}) EXPECT_NEAR(CutoffProfile{s}.integral(), 1.0, 1e-10);
  const auto space = FockConfigSpace::single(2, 4.0, 0.1);
  EXPECT_THROW(assemble_cutoff_hamiltonian(space, CutoffProfile{0.15}, kWeak), ParameterError);
}

TEST(CutoffModel, BlockStructureAndAdjointness) {
  const auto space = FockConfigSpace::single(2, 4.0, 0.125);
  const auto k0 = PhysicalConstants::make(1.0, 1.0, 0.0, 0.5);
  const auto h0 = assemble_cutoff_hamiltonian(space, CutoffProfile{0.5}, k0);
  for (int r = 0; r < h0.matrix.rows(); ++r)
    for (SparseMatrix::InnerIterator it(h0.matrix, r); it; ++it)
      EXPECT_EQ(h0.dofs.entries[r].sector, h0.dofs.entries[it.col()].sector);
  const auto h = assemble_cutoff_hamiltonian(space, CutoffProfile{0.5}, kWeak);
  // Creation block is the exact transpose of the annihilation block.
  int cross = 0;
  for (int r = 0; r < h.matrix.rows(); ++r)
    for (SparseMatrix::InnerIterator it(h.matrix, r); it; ++it)
      if (h.dofs.entries[r].sector != h.dofs.entries[it.col()].sector) {
        EXPECT_EQ(it.value(), h.matrix.coeff(it.col(), r));
        ++cross;
      }
  EXPECT_GT(cross, 0);
  EXPECT_LE(hermitian_defect(h.matrix), 1e-12 * max_abs_entry(h.matrix));
}

TEST(CutoffModel, GroundEnergyNegativeAndNearSelfEnergy) {
  const auto space = FockConfigSpace::single(2, 12.0, 0.0625);
  const CutoffProfile p{0.5};
  const auto h = assemble_cutoff_hamiltonian(space, p, kWeak);
  const double vh = gaussian_self_energy(0.5, kWeak);
  const auto r = lowest_fock_eigenpairs(h, 1.1 * vh, 1);
  EXPECT_LT(r.energies[0], 0.0);
  EXPECT_NEAR(r.energies[0], vh, 0.02 * std::abs(vh));
  EXPECT_NEAR(discrete_self_energy(space.grid, p, kWeak), vh, 0.01 * std::abs(vh));
}

TEST(RenormalizationScan, SlopeOfExactPowerLaw) {
  const std::vector<double> x{1.0, 2.0, 4.0}, y{-3.0, -6.0, -12.0};
  EXPECT_NEAR(loglog_slope(x, y), 1.0, 1e-14);
}
