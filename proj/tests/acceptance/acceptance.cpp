// One PASS/FAIL line per acceptance criterion. Optional arguments pick criteria by number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "../test_util.hpp"
#include "ibc/bohmian.hpp"
#include "ibc/crank_nicolson.hpp"
#include "ibc/fock_model.hpp"
#include "ibc/radial_creation.hpp"
#include "ibc/toy_model.hpp"

using namespace ibc;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const PhysicalConstants kToy = PhysicalConstants::make(1.0, 1.0, 1.0);
const PhysicalConstants kRadial = PhysicalConstants::make(1.0, 1.0, 1.0, 0.5);

ToyModel toy_128(const IbcFamily& f, bool check = true) {
  const auto g = toy_grids(8.0, 8.0, 1.0 / 16, 1.0 / 16);
  return assemble_toy_hamiltonian(g[0], g[1], f, kToy, check);
}

double max_norm_drift(const ToyModel& m, const SectoredState& a) {
  EvolutionRecord rec;
  evolve_crank_nicolson(m.op, a, 1e-3, 1000, 1.0, &rec, 10);
  double d = 0.0;
  for (std::size_t i = 0; i < rec.t.size(); ++i) d = std::max(d, std::abs(rec.p[i][0] + rec.p[i][1] - 1.0));
  return d;
}

Verdict c1_conservation() {
  Verdict v{true, ""};
  const IbcFamily fams[] = {IbcFamily::dirichlet(), IbcFamily::neumann(), IbcFamily::robin(-1, 0.25, 0.5, 0.875)};
  for (const auto& f : fams) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = toy_128(f);
    const double d = max_norm_drift(m, toy_initial_state(m, ToyScenario{}));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    v.pass = v.pass && d <= 1e-8 && secs <= 120.0;
    v.detail += fmt("%s drift %.1e (%.0fs), ", to_string(f.kind).c_str(), d, secs);
  }
  // alpha*delta - beta*gamma = 0, assembled without the family check. The
  // defect sits in the sector-1 rows, so the control starts with psi1 != 0.
  const auto bad = toy_128(IbcFamily::robin(1, 0.25, 2, 0.5), false);
  SectoredState a(bad.op.grids, Gauge::psi);
  a.sector(0) = gaussian_line(bad.line(), 0, 0.8, 0);
  a.sector(1) = gaussian_plane(bad.plane(), 0, 3, 0.7, 0.7, 0, -4);
  a = normalize(make_compliant(a, bad));
  const double d = max_norm_drift(bad, a);
  v.pass = v.pass && d >= 1e-4;
  v.detail += fmt("invalid robin drift %.2e (need >= 1e-4)", d);
  return v;
}

Verdict c2_balance() {
  auto run = [](int n) {
    const double w = 8.0, h = w / n;
    const auto g = toy_grids(w, w, h, h);
    const auto m = assemble_toy_hamiltonian(g[0], g[1], IbcFamily::dirichlet(), kToy);
    const testutil::SmoothRandom f1(7, w / 2), f2(8, w / 2);
    SectoredState s(m.op.grids, Gauge::psi);
    for (int i = 0; i < g[1].line_nodes(); ++i) {
      const double x = g[1].x_node(i);
      s.sector(0)[i] = f1(x);
      for (int j = 1; j <= g[1].cells(1); ++j) {
        const double y = g[1].half_node(j, 1);
        s.sector(1)[g[1].at(i, j)] = f2(x) * std::exp(cplx{-(y - 1) * (y - 1), 0.7 * y});
      }
    }
    return max_abs(balance_residual(make_compliant(s, m), m));
  };
  const double r1 = run(64), r2 = run(128);
  return {r1 / r2 >= 3.5, fmt("max residual %.3e -> %.3e, ratio %.2f (need >= 3.5)", r1, r2, r1 / r2)};
}

Verdict c3_exchange() {
  const auto m = toy_128(IbcFamily::dirichlet());
  EvolutionRecord rec;
  evolve_crank_nicolson(m.op, toy_initial_state(m, ToyScenario{}), 1e-3, 1000, 1.0, &rec, 10);
  double gained = 0.0, drift = 0.0;
  for (std::size_t i = 0; i < rec.t.size(); ++i) {
    gained = std::max(gained, rec.p[i][0] - rec.p[0][0]);
    drift = std::max(drift, std::abs(rec.norm[i] - 1.0));
  }
  return {gained >= 0.1 && drift <= 1e-8, fmt("sector-1 gain %.4f (need >= 0.1), total drift %.1e", gained, drift)};
}

Verdict c4_equivariance() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = toy_128(IbcFamily::dirichlet());
  ToyScenario sc;
  sc.line_sx = 0.8;
  sc.layer_s = 0.5;
  sc.layer_k = 2.0;
  CrankNicolsonStream st(m.op, toy_initial_state(m, sc), kToy, 1e-3, 1000);
  const auto rep = equivariance_test(100000, st, {0.2, 0.4, 0.6, 0.8, 1.0}, 42);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst = 0.0;
  for (const auto& r : rep.rows) worst = std::max(worst, std::abs(r.empirical - r.p1) / r.se);
  return {rep.passed() && secs <= 600.0,
          fmt("1e5 walkers, worst |z| %.2f over 5 probes (need <= 3), censored %.2f%%, %zu absorptions, %zu "
              "emissions (%.0fs)",
              worst, 100 * rep.censored_fraction, rep.absorptions, rep.emissions, secs)};
}

Verdict c5_radial() {
  // oracle: quadratic formula as written
  const double b = 1.0 / (2 * std::numbers::pi);
  const double kappa = (-b + std::sqrt(b * b + 4 * 0.5 * 0.5)) / (2 * 0.5);
  const double exact = b * kappa;
  std::vector<double> err;
  double ratio = 0.0;
  for (int inv : {64, 128, 256}) {
    const auto m = assemble_radial_hamiltonian(GridSpec::half_line(40.0, 1.0 / inv), kRadial);
    const auto gs = ground_state_radial(m);
    err.push_back(gs.energy - exact);
    ratio = (gs.state.sector(1)[0] / gs.state.sector(0)[0]).real();
  }
  const double order = std::log2(err[1] / err[2]);
  const double c = -1.0 / std::sqrt(std::numbers::pi);
  const bool pass = std::abs(err[2]) <= 5e-4 && err[1] / err[2] >= 3.5 && err[0] / err[1] >= 3.5 &&
                    std::abs(ratio - c) <= 1e-6;
  return {pass, fmt("E(1/256) - E = %.2e (need <= 5e-4), error ratios %.2f %.2f (order %.2f), IBC ratio off by %.1e",
                    err[2], err[0] / err[1], err[1] / err[2], order, std::abs(ratio - c))};
}

Verdict c6_inverse_radius() {
  const auto m = assemble_radial_hamiltonian(GridSpec::half_line(40.0, 1.0 / 128), kRadial);
  const auto& u = ground_state_radial(m).state.sector(1);
  double peak = 0.0;
  for (const auto& z : u) peak = std::max(peak, std::abs(z));
  const double u0 = std::abs(extrapolate_to_origin(u[1], u[2], u[3]));

  const auto k0 = PhysicalConstants::make(1.0, 1.0, 0.0, 0.5);
  const auto m0 = assemble_radial_hamiltonian(GridSpec::half_line(40.0, 1.0 / 128), k0);
  LanczosOptions opt;
  opt.nev = 2;
  double control = -1.0;
  for (const auto& vec : lowest_eigenpairs(m0.op.matrix, -0.1, opt).vectors) {
    const auto s = m0.op.scatter(vec.cast<cplx>());
    if (std::abs(s.sector(0)[0]) > 1e-8) continue;
    double pk = 0.0;
    for (const auto& z : s.sector(1)) pk = std::max(pk, std::abs(z));
    control = std::abs(extrapolate_to_origin(s.sector(1)[1], s.sector(1)[2], s.sector(1)[3])) / pk;
  }
  return {u0 >= 0.1 * peak && control >= 0.0 && control <= 1e-6,
          fmt("|r psi(0)| / peak %.3f (need >= 0.1), g = 0 control %.1e (need <= 1e-6)", u0 / peak, control)};
}

Verdict c7_bethe_peierls() {
  const auto grid = GridSpec::half_line(20.0, 1.0 / 32);
  double bp = 0.0;
  for (double alpha : {-0.5, 0.0, 2.0, std::numeric_limits<double>::infinity()}) {
    const auto op = bethe_peierls_operator(grid, alpha, kRadial);
    SectoredState a(op.grids, Gauge::u_tilde);
    for (int j = 1; j <= grid.cells(0); ++j) {
      const double r = grid.half_node(j);
      a.sector(0)[j] = std::exp(cplx{-(r - 4) * (r - 4) / 2.0, -2.0 * r});
    }
    op.fill_boundary(a);
    evolve_crank_nicolson(op, normalize(a), 0.01, 400, 1.0, nullptr, 1,
                          [&](int, const SectoredState& s) { bp = std::max(bp, std::abs(boundary_current(s, kRadial))); });
  }
  const auto m = assemble_radial_hamiltonian(grid, kRadial);
  double ibc_j = 0.0;
  evolve_crank_nicolson(m.op, radial_packet(m, 8.0, 1.0, 2.0), 0.01, 600, 1.0, nullptr, 1,
                        [&](int, const SectoredState& s) { ibc_j = std::max(ibc_j, std::abs(boundary_current(s, kRadial))); });
  return {bp <= 1e-10 && ibc_j >= 1e-3,
          fmt("Bethe-Peierls max |J0| %.1e (need <= 1e-10), IBC max |J0| %.3e (need >= 1e-3)", bp, ibc_j)};
}

Verdict c8_fock() {
  const auto k = PhysicalConstants::make(1.0, 1.0, 0.3, 0.5);
  const double e_min = 0.3 * 0.3 / (2 * std::numbers::pi);
  const auto space = FockConfigSpace::single(2, 8.0, 1.0 / 128);
  const auto r = lowest_eigenpair(assemble_fock_hamiltonian(space, k), k);
  const double rel = std::abs(r.energies[0] - e_min) / e_min;
  const double a = -0.3 / (2 * std::numbers::pi);
  double worst = 0.0;
  for (int n = 1; n <= 2; ++n) {
    const double want = a / std::sqrt(static_cast<double>(n));
    worst = std::max(worst, std::abs(fock_boundary_ratio(r.state, n, 128) - want) / std::abs(want));
  }
  return {rel <= 0.01 && r.energies[0] >= -1e-10 && worst <= 1e-4,
          fmt("E = %.7f vs %.6f, rel %.1e (need <= 1e-2), boundary ratios rel %.1e (need <= 1e-4), %zu unknowns",
              r.energies[0], e_min, rel, worst, space.dof_count())};
}

Verdict c9_pointwise() {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v{true, ""};
  const std::vector<std::vector<Vec3>> layouts{{Vec3{}}, {Vec3{0, 0, -1}, Vec3{0, 0, 1}}};
  for (const auto& src : layouts) {
    const ExactGroundState psi(kRadial, src);
    double worst = pointwise_residual(psi, {{}}, kRadial, 1e-3).max_relative;
    for (int n = 1; n <= 2; ++n)
      worst = std::max(worst, pointwise_residual(psi, random_configs(n, 100, src, 2024), kRadial, 1e-3).max_relative);
    v.pass = v.pass && worst <= 1e-5;
    v.detail += fmt("%zu source(s): E = %.7f, max residual %.1e; ", src.size(), psi.energy(), worst);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.pass = v.pass && secs <= 300.0;
  v.detail += fmt("need <= 1e-5 (%.0fs)", secs);
  return v;
}

Verdict c10_renorm() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto k = PhysicalConstants::make(1.0, 1.0, 0.1, 0.02);
  const auto scan = renormalization_scan({0.8, 0.4, 0.2, 0.1}, FockConfigSpace::single(2, 40.0, 0.05), k);
  bool increasing = true;
  for (std::size_t i = 1; i < scan.rows.size(); ++i)
    increasing = increasing && std::abs(scan.rows[i].energy) > std::abs(scan.rows[i - 1].energy);
  std::vector<double> x, y;
  for (double s : {0.4, 0.2, 0.1}) {
    x.push_back(1.0 / s);
    y.push_back(gaussian_self_energy(s, k));
  }
  const double oracle = loglog_slope(x, y);
  const double gap_rel = std::abs(scan.rows.back().gap - scan.ibc_gap) / scan.ibc_gap;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {increasing && std::abs(scan.slope - 1.0) <= 0.15 && gap_rel <= 0.05 && secs <= 900.0,
          fmt("|E_phi| increasing %s, slope %.3f (oracle %.3f, need 1 +- 0.15), gap %.5f vs IBC %.5f, rel %.2f%% "
              "(need <= 5%%) (%.0fs)",
              increasing ? "yes" : "no", scan.slope, oracle, scan.rows.back().gap, scan.ibc_gap, 100 * gap_rel, secs)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"toy conservation", c1_conservation},   {"balance identity", c2_balance},
      {"probability exchange", c3_exchange},   {"Bohmian equivariance", c4_equivariance},
      {"radial bound state", c5_radial},       {"1/r divergence", c6_inverse_radius},
      {"Bethe-Peierls contrast", c7_bethe_peierls}, {"Fock ground state", c8_fock},
      {"pointwise eigen-identity", c9_pointwise}, {"renormalization scan", c10_renorm},
  };
  std::set<int> pick;
  for (int i = 1; i < argc; ++i) pick.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!pick.empty() && !pick.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %2d %s: %s: %s\n", id, v.pass ? "PASS" : "FAIL", criteria[i].first, v.detail.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
