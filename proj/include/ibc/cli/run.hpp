#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <new>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "ibc/bohmian.hpp"
#include "ibc/cli/config.hpp"
#include "ibc/fock_model.hpp"
#include "ibc/radial_creation.hpp"
#include "ibc/toy_model.hpp"

namespace ibc::cli {

/// Exit codes; every failure path maps to exactly one of these.
enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_numerical = 2, exit_capacity = 3 };

/// Output directory or file could not be written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Shortest round-trip decimal form, so artifacts are byte-stable.
inline std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw NumericalError("SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Named file contents of one run.
using Artifacts = std::map<std::string, std::string>;

inline std::string pretty(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// Writes every artifact plus manifest.json and returns the manifest.
inline nlohmann::json write_outputs(const Artifacts& files, const std::filesystem::path& dir,
                                    const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& data) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary);
    out << data;
    out.close();
    if (!out) throw IoError("cannot write " + path.string());
  };
  nlohmann::json manifest;
  manifest["command"] = cfg.command;
  manifest["config"] = cfg.echo();
  manifest["files"] = nlohmann::json::array();
  for (const auto& [name, data] : files) {
    put(name, data);
    manifest["files"].push_back({{"path", name}, {"bytes", data.size()}, {"sha256", sha256_hex(data)}});
  }
  put("manifest.json", pretty(manifest));
  return manifest;
}

namespace detail {

inline PhysicalConstants constants(const ExperimentConfig& c) {
  return PhysicalConstants::make(c.number("constants.hbar"), c.number("constants.mass"), c.number("constants.coupling"),
                                 c.has("constants.e0") ? c.number("constants.e0") : 0.0);
}

inline ToyModel toy_model(const ExperimentConfig& c) {
  const double h = c.number("grid.spacing");
  const auto g = toy_grids(c.number("grid.width"), c.number("grid.height"), h, h);
  return assemble_toy_hamiltonian(g[0], g[1], c.family(), constants(c));
}

inline ToyScenario scenario(const ExperimentConfig& c) {
  ToyScenario s;
  s.x0 = c.number("packet.x0");
  s.y0 = c.number("packet.y0");
  s.sx = c.number("packet.sx");
  s.sy = c.number("packet.sy");
  s.kx = c.number("packet.kx");
  s.ky = c.number("packet.ky");
  s.packet_amp = c.number("packet.amplitude");
  s.line_sx = c.number("packet.line_width");
  s.layer_s = c.number("packet.layer_width");
  s.layer_k = c.number("packet.layer_k");
  return s;
}

inline int step_count(const ExperimentConfig& c) {
  return static_cast<int>(std::lround(c.number("run.horizon") / c.number("run.dt")));
}

inline Artifacts evolve_toy(const ExperimentConfig& c) {
  const auto m = toy_model(c);
  const auto a0 = toy_initial_state(m, scenario(c));
  std::ostringstream csv;
  csv << "t,p1,p2,norm,max_balance_residual\n";
  const double dt = c.number("run.dt");
  const auto last = evolve_crank_nicolson(
      m.op, a0, dt, step_count(c), m.constants.hbar, nullptr, static_cast<int>(c.integer("run.record_every")),
      [&](int s, const SectoredState& a) {
        const double p1 = sector_norm2(a, 0), p2 = sector_norm2(a, 1);
        csv << num(s * dt) << ',' << num(p1) << ',' << num(p2) << ',' << num(p1 + p2) << ','
            << num(max_abs(balance_residual(a, m))) << '\n';
      });
  return {{"series.csv", csv.str()}, {"state_final.json", pretty(to_json(last))}};
}

inline Artifacts currents(const ExperimentConfig& c) {
  const auto m = toy_model(c);
  const auto a = evolve_crank_nicolson(m.op, toy_initial_state(m, scenario(c)), c.number("run.dt"), step_count(c),
                                       m.constants.hbar);
  const auto f = current_fields(a, m.constants);
  const auto r = balance_residual(a, m);
  std::ostringstream csv;
  csv << "x,rho1,j1,boundary_flux,balance_residual\n";
  for (int i = 0; i < m.line().line_nodes(); ++i)
    csv << num(m.line().x_node(i)) << ',' << num(std::norm(a.sector(0)[i])) << ',' << num(f.j1[i]) << ','
        << num(f.boundary_flux[i]) << ',' << num(r[i]) << '\n';
  return {{"currents.csv", csv.str()}};
}

inline Artifacts sample_bohmian(const ExperimentConfig& c) {
  const auto m = toy_model(c);
  CrankNicolsonStream st(m.op, toy_initial_state(m, scenario(c)), m.constants, c.number("run.dt"),
                         static_cast<std::size_t>(step_count(c)));
  std::ostringstream raw;
  const auto n_csv = static_cast<std::size_t>(c.integer("run.csv_trajectories"));
  const auto rep = equivariance_test(static_cast<std::size_t>(c.integer("run.n_traj")), st, c.list("run.probes"),
                                     c.seed, &raw, n_csv);
  // lockstep output is time-major; reorder to (traj_id, t), stable within a trajectory
  std::istringstream in(raw.str());
  std::string header, line;
  std::getline(in, header);
  std::vector<std::vector<std::string>> by_traj(n_csv);
  while (std::getline(in, line)) by_traj[std::stoul(line.substr(0, line.find(',')))].push_back(line);
  std::string csv = header + "\n";
  for (const auto& rows : by_traj)
    for (const auto& r : rows) csv += r + "\n";

  nlohmann::json j;
  j["n_traj"] = rep.n_traj;
  j["censored"] = rep.censored;
  j["censored_fraction"] = rep.censored_fraction;
  j["absorptions"] = rep.absorptions;
  j["emissions"] = rep.emissions;
  j["valid"] = rep.valid;
  j["passed"] = rep.passed();
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rep.rows)
    j["rows"].push_back({{"t", r.t}, {"p1", r.p1}, {"empirical", r.empirical}, {"se", r.se}, {"flagged", r.flagged}});
  return {{"trajectories.csv", csv}, {"equivariance.json", pretty(j)}};
}

inline Artifacts radial_spectrum(const ExperimentConfig& c) {
  const auto k = constants(c);
  const auto m = assemble_radial_hamiltonian(GridSpec::half_line(c.number("grid.length"), c.number("grid.spacing")), k);
  const auto gs = ground_state_radial(m);
  const auto bs = bound_state_params(k);
  // closed form in u-gauge: u = A exp(-kappa r), psi0 = A / ratio, unit norm
  const double ratio = m.ibc_ratio();
  const double amp = std::copysign(1.0 / std::sqrt(1.0 / (ratio * ratio) + 1.0 / (2.0 * bs.kappa)), ratio);
  const auto& g = m.grid;
  const double h = g.spacing[0];
  double e2 = std::norm(gs.state.sector(0)[0] - amp / ratio);
  for (int j = 1; j <= g.cells(0); ++j)
    e2 += h * std::norm(gs.state.sector(1)[j] - amp * std::exp(-bs.kappa * g.half_node(j)));

  LanczosOptions opt;
  opt.nev = static_cast<int>(c.integer("run.n_eigen"));
  const auto pairs = lowest_eigenpairs(m.op.matrix, bs.energy - 0.05 * (k.e0 - bs.energy), opt);
  nlohmann::json j;
  j["kappa_analytic"] = bs.kappa;
  j["energy_analytic"] = bs.energy;
  j["energy_numeric"] = gs.energy;
  j["l2_error"] = std::sqrt(e2);
  j["ibc_ratio"] = (gs.state.sector(1)[0] / gs.state.sector(0)[0]).real();
  j["ibc_ratio_expected"] = ratio;
  j["spectrum"] = pairs.values;
  return {{"radial.json", pretty(j)}};
}

inline Artifacts fock_ground(const ExperimentConfig& c) {
  const auto k = constants(c);
  const double h = c.number("grid.spacing");
  auto space = FockConfigSpace::single(static_cast<int>(c.integer("run.n_max")), c.number("grid.length"), h);
  space.memory_cap_bytes = static_cast<std::size_t>(c.integer("run.memory_cap_mb")) << 20;
  const auto op = assemble_fock_hamiltonian(space, k);
  const auto r = lowest_eigenpair(op, k);
  const ExactGroundState single(k, {Vec3{}});
  const int anchor = std::clamp(static_cast<int>(std::lround(1.0 / h)), 1, space.grid.cells(0));
  nlohmann::json j;
  j["n_max"] = space.n_max;
  j["spacing"] = h;
  j["energy"] = r.energies[0];
  j["paper_E_min"] = single.energy();
  j["rel_err"] = (r.energies[0] - single.energy()) / single.energy();
  j["ibc_ratios"] = nlohmann::json::array();
  j["ibc_ratios_expected"] = nlohmann::json::array();
  for (int n = 1; n <= space.n_max; ++n) {
    j["ibc_ratios"].push_back(fock_boundary_ratio(r.state, n, anchor));
    j["ibc_ratios_expected"].push_back(-k.ibc_coeff() / std::sqrt(static_cast<double>(n)));
  }

  // closed-form pointwise identity, one or two sources
  const double sep = c.number("run.separation");
  const std::vector<Vec3> src = c.integer("run.sources") == 1 ? std::vector<Vec3>{Vec3{}}
                                                              : std::vector<Vec3>{{0, 0, -0.5 * sep}, {0, 0, 0.5 * sep}};
  const ExactGroundState psi(k, src);
  double worst = 0.0;
  const int count = static_cast<int>(c.integer("run.residual_configs"));
  for (int n = 0; n <= 2; ++n) {
    const auto configs = n == 0 ? std::vector<std::vector<Vec3>>{{}} : random_configs(n, count, src, c.seed);
    worst = std::max(worst, pointwise_residual(psi, configs, k, 1e-3).max_relative);
  }
  j["closed_form"] = {{"sources", src.size()},
                      {"separation", src.size() == 2 ? sep : 0.0},
                      {"energy", psi.energy()},
                      {"max_rel_residual", worst}};
  return {{"fock.json", pretty(j)}};
}

inline Artifacts renorm_scan(const ExperimentConfig& c) {
  const auto k = constants(c);
  auto space = FockConfigSpace::single(static_cast<int>(c.integer("run.n_max")), c.number("grid.length"),
                                       c.number("grid.spacing"));
  space.memory_cap_bytes = static_cast<std::size_t>(c.integer("run.memory_cap_mb")) << 20;
  const auto widths = c.list("run.widths");
  const auto scan = renormalization_scan(widths, space, k);
  std::ostringstream csv;
  csv << "s,E_phi,gap_phi,ibc_gap\n";
  nlohmann::json oracle = nlohmann::json::array();
  for (const auto& r : scan.rows) {
    csv << num(r.width) << ',' << num(r.energy) << ',' << num(r.gap) << ',' << num(scan.ibc_gap) << '\n';
    oracle.push_back(gaussian_self_energy(r.width, k));
  }
  nlohmann::json j;
  j["slope"] = scan.slope;
  j["ibc_energy"] = scan.ibc_energy;
  j["ibc_gap"] = scan.ibc_gap;
  j["continuum_self_energy"] = oracle;
  return {{"renorm.csv", csv.str()}, {"renorm.json", pretty(j)}};
}

}  // namespace detail

struct RunResult {
  int exit_code = exit_ok;
  std::string error;
  nlohmann::json manifest;
};

inline Artifacts run_pipeline(const ExperimentConfig& c) {
  if (c.command == "evolve-toy") return detail::evolve_toy(c);
  if (c.command == "currents") return detail::currents(c);
  if (c.command == "sample-bohmian") return detail::sample_bohmian(c);
  if (c.command == "radial-spectrum") return detail::radial_spectrum(c);
  if (c.command == "fock-ground") return detail::fock_ground(c);
  if (c.command == "renorm-scan") return detail::renorm_scan(c);
  throw ConfigError({"unknown command '" + c.command + "'"});
}

/// Runs the pipeline and writes artifacts to cfg.output_dir. Errors become
/// exit codes: config, parameter, structural and IO errors 1; numerical,
/// precondition and degenerate-input errors 2; capacity and allocation 3.
inline RunResult run_command(const ExperimentConfig& cfg) {
  RunResult r;
  try {
    r.manifest = write_outputs(run_pipeline(cfg), cfg.output_dir, cfg);
  } catch (const CapacityError& e) {
    r = {exit_capacity, e.what(), {}};
  } catch (const std::bad_alloc&) {
    r = {exit_capacity, "out of memory", {}};
  } catch (const NumericalError& e) {
    r = {exit_numerical, e.what(), {}};
  } catch (const PreconditionError& e) {
    r = {exit_numerical, e.what(), {}};
  } catch (const DegenerateInputError& e) {
    r = {exit_numerical, e.what(), {}};
  } catch (const Error& e) {
    r = {exit_config, e.what(), {}};
  } catch (const std::filesystem::filesystem_error& e) {
    r = {exit_config, e.what(), {}};
  }
  return r;
}

}  // namespace ibc::cli
