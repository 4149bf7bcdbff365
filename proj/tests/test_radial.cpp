#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "ibc/crank_nicolson.hpp"
#include "ibc/radial_creation.hpp"

using namespace ibc;

namespace {

const PhysicalConstants kUnit = PhysicalConstants::make(1.0, 1.0, 1.0, 0.5);

// Exact continuum ground state: psi0 = A / c, u(r) = A exp(-kappa r), unit norm.
struct ExactRadial {
  double kappa, energy, c, amp;
  explicit ExactRadial(const PhysicalConstants& k) {
    // Independent of bound_state_params: quadratic formula as written.
    const double a = k.hbar * k.hbar / (2 * k.mass);
    const double b = k.coupling * k.coupling * k.mass / (2 * std::numbers::pi * k.hbar * k.hbar);
    kappa = (-b + std::sqrt(b * b + 4 * a * k.e0)) / (2 * a);
    energy = b * kappa;
    c = -k.coupling * k.mass / (std::sqrt(std::numbers::pi) * k.hbar * k.hbar);
    amp = std::copysign(1.0 / std::sqrt(1.0 / (c * c) + 1.0 / (2 * kappa)), c);
  }
};

double radial_l2_error(const SectoredState& s, const ExactRadial& ex) {
  const auto& g = s.grid(1);
  const double h = g.spacing[0];
  double e = std::norm(s.sector(0)[0] - ex.amp / ex.c);
  for (int j = 1; j <= g.cells(0); ++j) e += h * std::norm(s.sector(1)[j] - ex.amp * std::exp(-ex.kappa * g.half_node(j)));
  return std::sqrt(e);
}

}  // namespace

TEST(RadialAssembly, DecouplesAtZeroCoupling) {
  const auto k0 = PhysicalConstants::make(1.0, 1.0, 0.0, 0.5);
  const auto m = assemble_radial_hamiltonian(GridSpec::half_line(4.0, 0.25), k0);
  const auto& d = m.op.dofs;
  const long p0 = d.dof(0, 0);
  for (SparseMatrix::InnerIterator it(m.op.matrix, p0); it; ++it) ADD_FAILURE() << "entry in sector-0 row";
  const double kk = 0.5 / (0.25 * 0.25);
  EXPECT_DOUBLE_EQ(m.op.matrix.coeff(d.dof(1, 1), d.dof(1, 1)), 3 * kk + 0.5);
  EXPECT_DOUBLE_EQ(m.op.matrix.coeff(d.dof(1, 1), p0), 0.0);
  EXPECT_DOUBLE_EQ(m.op.matrix.coeff(d.dof(1, 5), d.dof(1, 5)), 2 * kk + 0.5);
}

TEST(RadialAssembly, BoundaryClosureIsMinusPsi0OverRootPi) {
  const auto m = assemble_radial_hamiltonian(GridSpec::half_line(4.0, 0.25), kUnit);
  SectoredState a(m.op.grids, Gauge::u_tilde);
  a.sector(0)[0] = cplx(0.7, -0.2);
  m.op.fill_boundary(a);
  EXPECT_NEAR(std::abs(a.sector(1)[0] + a.sector(0)[0] / std::sqrt(std::numbers::pi)), 0.0, 1e-15);
  const auto b = make_compliant_radial(a, kUnit);
  EXPECT_EQ(b.sector(1)[0], a.sector(1)[0]);
  EXPECT_NEAR(m.ibc_ratio(), -0.5641895835477563, 1e-15);
}

TEST(RadialAssembly, HermitianOnFineGrid) {
  const auto k = PhysicalConstants::make(0.8, 1.7, 2.3, 0.9);
  const auto m = assemble_radial_hamiltonian(GridSpec::half_line(16.0, 1.0 / 256), k);
  ASSERT_EQ(m.grid.cells(0), 4096);
  EXPECT_LE(hermitian_defect(m.op.matrix), 1e-12 * std::max(1.0, max_abs_entry(m.op.matrix)));
  EXPECT_THROW(assemble_radial_hamiltonian(GridSpec::line(4.0, 0.25), k), StructuralError);
}

TEST(BoundStateParams, QuadraticRootAndLimits) {
  const auto bs = bound_state_params(kUnit);
  EXPECT_NEAR(bs.kappa, 0.853431002, 1e-9);
  EXPECT_NEAR(bs.energy, 0.135829, 5e-4);
  EXPECT_NEAR(bs.energy, bs.kappa / (2 * std::numbers::pi), 1e-15);
  // kappa^2/2 + E = E0
  EXPECT_NEAR(0.5 * bs.kappa * bs.kappa + bs.energy, 0.5, 1e-15);
  for (double g : {1e-2, 1e-4, 1e-6}) {
    const auto w = bound_state_params(PhysicalConstants::make(1.0, 1.0, g, 0.5));
    EXPECT_NEAR(w.kappa, 1.0, g * g);
    EXPECT_LE(w.energy, g * g);
  }
  EXPECT_THROW(bound_state_params(PhysicalConstants::make(1.0, 1.0, 1.0, 0.0)), ParameterError);
}

TEST(RadialGroundState, EnergyConvergesAtSecondOrder) {
  const ExactRadial ex(kUnit);
  std::vector<double> err;
  for (int inv : {64, 128, 256}) {
    const auto m = assemble_radial_hamiltonian(GridSpec::half_line(40.0, 1.0 / inv), kUnit);
    const auto gs = ground_state_radial(m);
    err.push_back(gs.energy - ex.energy);
  }
  EXPECT_LE(std::abs(err.back()), 5e-4);
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double ratio = err[i - 1] / err[i];
    EXPECT_GE(ratio, 3.5);
    EXPECT_LE(ratio, 4.5);
  }
}

TEST(RadialGroundState, EigenvectorMatchesClosedForm) {
  const ExactRadial ex(kUnit);
  const auto m = assemble_radial_hamiltonian(GridSpec::half_line(40.0, 1.0 / 256), kUnit);
  const auto gs = ground_state_radial(m);
  EXPECT_LE(radial_l2_error(gs.state, ex), 1e-3);
  const cplx ratio = gs.state.sector(1)[0] / gs.state.sector(0)[0];
  EXPECT_NEAR(ratio.real(), ex.c, 1e-6);
  EXPECT_NEAR(ratio.imag(), 0.0, 1e-12);
}

TEST(RadialGroundState, InverseRadiusProfile) {
  const auto m = assemble_radial_hamiltonian(GridSpec::half_line(40.0, 1.0 / 128), kUnit);
  const auto gs = ground_state_radial(m);
  const auto& u = gs.state.sector(1);
  double peak = 0.0;
  for (const auto& z : u) peak = std::max(peak, std::abs(z));
  const cplx u0 = extrapolate_to_origin(u[1], u[2], u[3]);
  EXPECT_GE(std::abs(u0), 0.1 * peak);

  // g = 0: lowest state living in the particle sector has u(0) = 0.
  const auto k0 = PhysicalConstants::make(1.0, 1.0, 0.0, 0.5);
  const auto m0 = assemble_radial_hamiltonian(GridSpec::half_line(40.0, 1.0 / 128), k0);
  LanczosOptions opt;
  opt.nev = 2;
  const auto pairs = lowest_eigenpairs(m0.op.matrix, -0.1, opt);
  bool found = false;
  for (const auto& v : pairs.vectors) {
    const auto s = m0.op.scatter(v.cast<cplx>());
    if (std::abs(s.sector(0)[0]) > 1e-8) continue;
    found = true;
    double pk = 0.0;
    for (const auto& z : s.sector(1)) pk = std::max(pk, std::abs(z));
    EXPECT_LE(std::abs(extrapolate_to_origin(s.sector(1)[1], s.sector(1)[2], s.sector(1)[3])), 1e-6 * pk);
  }
  EXPECT_TRUE(found);
}

TEST(RadialExtrapolation, ExactForQuadratics) {
  auto f = [](double r) { return 2.0 - 3.0 * r + 0.7 * r * r; };
  const double h = 0.1;
  EXPECT_NEAR(extrapolate_to_origin(f(0.5 * h), f(1.5 * h), f(2.5 * h)).real(), 2.0, 1e-14);
}

TEST(BethePeierls, BoundStateEnergy) {
  const double alpha = 1.0;
  std::vector<double> err;
  for (int inv : {32, 64}) {
    const auto op = bethe_peierls_operator(GridSpec::half_line(30.0, 1.0 / inv), alpha, kUnit);
    const auto pairs = lowest_eigenpairs(op.matrix, -0.6);
    err.push_back(std::abs(pairs.values[0] + 0.5 * alpha * alpha));
  }
  EXPECT_LE(err.back(), 1e-4);
  EXPECT_GE(err[0] / err[1], 3.5);
  EXPECT_THROW(bethe_peierls_operator(GridSpec::half_line(4.0, 0.5), 4.0, kUnit), ParameterError);
}

TEST(BethePeierls, NoBoundaryFluxWhileEvolving) {
  const auto grid = GridSpec::half_line(20.0, 1.0 / 32);
  for (double alpha : {-0.5, 0.0, 2.0, std::numeric_limits<double>::infinity()}) {
    const auto op = bethe_peierls_operator(grid, alpha, kUnit);
    SectoredState a(op.grids, Gauge::u_tilde);
    for (int j = 1; j <= grid.cells(0); ++j) {
      const double r = grid.half_node(j);
      a.sector(0)[j] = std::exp(cplx{-(r - 4) * (r - 4) / 2.0, -2.0 * r});
    }
    op.fill_boundary(a);
    double worst = 0.0;
    evolve_crank_nicolson(op, normalize(a), 0.01, 400, 1.0, nullptr, 1,
                          [&](int, const SectoredState& s) { worst = std::max(worst, std::abs(boundary_current(s, kUnit))); });
    EXPECT_LE(worst, 1e-10) << "alpha " << alpha;
  }
}

TEST(RadialEvolution, IbcAbsorbsIncomingPacket) {
  const auto m = assemble_radial_hamiltonian(GridSpec::half_line(20.0, 1.0 / 32), kUnit);
  const auto a = radial_packet(m, 8.0, 1.0, 2.0);
  double worst = 0.0;
  evolve_crank_nicolson(m.op, a, 0.01, 600, 1.0, nullptr, 1,
                        [&](int, const SectoredState& s) { worst = std::max(worst, std::abs(boundary_current(s, kUnit))); });
  EXPECT_GE(worst, 1e-3);
}

TEST(RadialEvolution, SectorZeroGainEqualsMidpointCurrent) {
  const auto m = assemble_radial_hamiltonian(GridSpec::half_line(20.0, 1.0 / 32), kUnit);
  const double dt = 0.01;
  CrankNicolson cn(m.op, dt);
  VectorXc v = m.op.gather(radial_packet(m, 6.0, 1.0, 2.0, cplx(0.1, 0.05)));
  v /= v.norm();
  double largest = 0.0;
  for (int s = 0; s < 500; ++s) {
    const VectorXc before = v;
    cn.step(v);
    const double dp0 = std::norm(v[m.op.dofs.dof(0, 0)]) - std::norm(before[m.op.dofs.dof(0, 0)]);
    const double j0 = boundary_current(m.op.scatter(0.5 * (v + before)), kUnit);
    EXPECT_NEAR(dp0, dt * j0, 1e-13);
    largest = std::max(largest, std::abs(dp0));
  }
  EXPECT_GE(largest, 1e-6);
}
