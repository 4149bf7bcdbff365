#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "ibc/crank_nicolson.hpp"
#include "ibc/errors.hpp"
#include "ibc/rng.hpp"
#include "ibc/toy_model.hpp"

namespace ibc {

/// Thrown by the point evaluators when |psi|^2 is below the floor.
class NodeAvoidanceError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

struct Vec2 {
  double x = 0, y = 0;
};

/// Densities and currents of a toy state at one time, on the full node layout
/// (sector-2 row 0 holds the boundary values).
struct FieldSlice {
  double t = 0.0;
  std::vector<double> rho1, j1;
  std::vector<double> rho2, j2x, j2y;
  double peak1 = 0.0, peak2 = 0.0;
  double p1 = 0.0;  // sector-1 probability
};

inline FieldSlice make_field_slice(const SectoredState& a, const PhysicalConstants& k, double t = 0.0) {
  const auto f = current_fields(a, k);
  FieldSlice s;
  s.t = t;
  s.j1 = f.j1;
  s.j2x = f.j2x;
  s.j2y = f.j2y;
  s.rho1.resize(a.sector(0).size());
  s.rho2.resize(a.sector(1).size());
  for (std::size_t i = 0; i < s.rho1.size(); ++i) s.rho1[i] = std::norm(a.sector(0)[i]);
  for (std::size_t i = 0; i < s.rho2.size(); ++i) s.rho2[i] = std::norm(a.sector(1)[i]);
  s.peak1 = *std::max_element(s.rho1.begin(), s.rho1.end());
  s.peak2 = *std::max_element(s.rho2.begin(), s.rho2.end());
  const double n = norm2(a);
  s.p1 = n > 0.0 ? sector_norm2(a, 0) / n : 0.0;
  return s;
}

/// Node geometry of the toy grids, with Dirichlet walls as zero-valued virtual nodes.
class ToyLattice {
 public:
  ToyLattice() = default;
  explicit ToyLattice(const std::vector<GridSpec>& g)
      : hx_(g[1].spacing[0]), hy_(g[1].spacing[1]), nx_(g[1].line_nodes()), ny_(g[1].cells(1)),
        width_(g[1].extents[0]), height_(g[1].extents[1]) {}

  double hx() const { return hx_; }
  double hy() const { return hy_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double width() const { return width_; }
  double height() const { return height_; }

  struct Stencil {
    int i0, i1;  // -1 or n: virtual wall node
    double w;    // weight of i1
  };

  Stencil locate_x(double x) const {
    const double u = (x + 0.5 * width_) / hx_ - 1.0;  // node index coordinate, walls at -1 and nx
    const double c = std::clamp(u, -1.0, static_cast<double>(nx_));
    const int i0 = std::min(static_cast<int>(std::floor(c)), nx_ - 1);
    return {i0, i0 + 1, c - i0};
  }

  /// Rows: 0 at y = 0, j at (j - 1/2) hy, wall at ny hy (virtual row ny + 1).
  Stencil locate_y(double y) const {
    if (y < 0.5 * hy_) return {0, 1, std::max(y, 0.0) / (0.5 * hy_)};
    const double top = (ny_ - 0.5) * hy_;
    if (y >= top) return {ny_, ny_ + 1, std::min((y - top) / (0.5 * hy_), 1.0)};
    const double u = y / hy_ + 0.5;
    const int j0 = static_cast<int>(std::floor(u));
    return {j0, j0 + 1, u - j0};
  }

  double line_value(const std::vector<double>& f, double x) const {
    const auto s = locate_x(x);
    return (1.0 - s.w) * at1(f, s.i0) + s.w * at1(f, s.i1);
  }

  double plane_value(const std::vector<double>& f, double x, double y) const {
    const auto sx = locate_x(x);
    const auto sy = locate_y(y);
    const double a = (1.0 - sy.w) * at2(f, sx.i0, sy.i0) + sy.w * at2(f, sx.i0, sy.i1);
    const double b = (1.0 - sy.w) * at2(f, sx.i1, sy.i0) + sy.w * at2(f, sx.i1, sy.i1);
    return (1.0 - sx.w) * a + sx.w * b;
  }

 private:
  double at1(const std::vector<double>& f, int i) const { return (i < 0 || i >= nx_) ? 0.0 : f[i]; }
  double at2(const std::vector<double>& f, int i, int j) const {
    return (i < 0 || i >= nx_ || j > ny_) ? 0.0 : f[static_cast<std::size_t>(i) * (ny_ + 1) + j];
  }

  double hx_ = 0, hy_ = 0;
  int nx_ = 0, ny_ = 0;
  double width_ = 0, height_ = 0;
};

inline constexpr double kDensityFloor = 1e-12;

namespace detail {

/// Fields at fraction theta in [0, 1] between two slices, linear in time.
struct SlicePair {
  const FieldSlice* a;
  const FieldSlice* b;
  const ToyLattice* lat;

  double mix(double fa, double fb, double theta) const { return (1.0 - theta) * fa + theta * fb; }

  std::optional<Vec2> velocity2(double x, double y, double theta) const {
    const double rho = mix(lat->plane_value(a->rho2, x, y), lat->plane_value(b->rho2, x, y), theta);
    if (!(rho > kDensityFloor * mix(a->peak2, b->peak2, theta))) return std::nullopt;
    const double jx = mix(lat->plane_value(a->j2x, x, y), lat->plane_value(b->j2x, x, y), theta);
    const double jy = mix(lat->plane_value(a->j2y, x, y), lat->plane_value(b->j2y, x, y), theta);
    return Vec2{jx / rho, jy / rho};
  }

  std::optional<double> velocity1(double x, double theta) const {
    const double rho = mix(lat->line_value(a->rho1, x), lat->line_value(b->rho1, x), theta);
    if (!(rho > kDensityFloor * mix(a->peak1, b->peak1, theta))) return std::nullopt;
    return mix(lat->line_value(a->j1, x), lat->line_value(b->j1, x), theta) / rho;
  }

  double boundary_flux(double x, double theta) const {
    return mix(lat->plane_value(a->j2y, x, 0.0), lat->plane_value(b->j2y, x, 0.0), theta);
  }

  /// max(0, j2y(x, 0)) / rho1(x)
  std::optional<double> rate(double x, double theta) const {
    const double rho = mix(lat->line_value(a->rho1, x), lat->line_value(b->rho1, x), theta);
    if (!(rho > kDensityFloor * mix(a->peak1, b->peak1, theta))) return std::nullopt;
    return std::max(0.0, boundary_flux(x, theta)) / rho;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Point evaluators on a single state.

/// Bohmian velocity j / rho at q; sector 0 is the line (q.y ignored), sector 1 the half-plane.
inline Vec2 velocity(const SectoredState& a, std::size_t sector, Vec2 q, const PhysicalConstants& k) {
  if (sector > 1) throw StructuralError("toy states have sectors 0 and 1");
  const auto s = make_field_slice(a, k);
  const ToyLattice lat(a.grids());
  const detail::SlicePair p{&s, &s, &lat};
  if (sector == 0) {
    const auto v = p.velocity1(q.x, 0.0);
    if (!v) throw NodeAvoidanceError("sector-1 density below floor", lat.line_value(s.rho1, q.x));
    return {*v, 0.0};
  }
  const auto v = p.velocity2(q.x, q.y, 0.0);
  if (!v) throw NodeAvoidanceError("sector-2 density below floor", lat.plane_value(s.rho2, q.x, q.y));
  return *v;
}

inline double jump_rate(const SectoredState& a, double x, const PhysicalConstants& k) {
  const auto s = make_field_slice(a, k);
  const ToyLattice lat(a.grids());
  const auto r = detail::SlicePair{&s, &s, &lat}.rate(x, 0.0);
  if (!r) throw NodeAvoidanceError("sector-1 density below floor", lat.line_value(s.rho1, x));
  return *r;
}

// ---------------------------------------------------------------------------
// State providers.

/// Sequential source of field slices at t = n * step.
class StateStream {
 public:
  virtual ~StateStream() = default;
  virtual double step() const = 0;
  virtual std::size_t steps() const = 0;  // last available index
  virtual std::size_t index() const = 0;
  virtual const FieldSlice& slice() const = 0;
  virtual const std::vector<GridSpec>& grids() const = 0;
  virtual void advance() = 0;
  virtual void rewind() = 0;
};

/// Precomputed slices.
class SliceSeries : public StateStream {
 public:
  SliceSeries(std::vector<GridSpec> grids, std::vector<FieldSlice> slices, double step)
      : grids_(std::move(grids)), slices_(std::move(slices)), step_(step) {
    if (slices_.empty()) throw StructuralError("empty slice series");
  }
  double step() const override { return step_; }
  std::size_t steps() const override { return slices_.size() - 1; }
  std::size_t index() const override { return n_; }
  const FieldSlice& slice() const override { return slices_[n_]; }
  const std::vector<GridSpec>& grids() const override { return grids_; }
  void advance() override {
    if (n_ + 1 >= slices_.size()) throw StructuralError("slice series exhausted");
    ++n_;
  }
  void rewind() override { n_ = 0; }

 private:
  std::vector<GridSpec> grids_;
  std::vector<FieldSlice> slices_;
  double step_;
  std::size_t n_ = 0;
};

/// Crank-Nicolson evolution computed on demand; only the current state is kept.
class CrankNicolsonStream : public StateStream {
 public:
  CrankNicolsonStream(const HermitianOperator& h, const SectoredState& a0, const PhysicalConstants& k, double dt,
                      std::size_t steps)
      : h_(h), a0_(a0), k_(k), cn_(h, dt, k.hbar), dt_(dt), steps_(steps) {
    rewind();
  }
  double step() const override { return dt_; }
  std::size_t steps() const override { return steps_; }
  std::size_t index() const override { return n_; }
  const FieldSlice& slice() const override { return slice_; }
  const std::vector<GridSpec>& grids() const override { return h_.grids; }
  const SectoredState& state() const { return state_; }
  void advance() override {
    if (n_ >= steps_) throw StructuralError("evolution horizon exceeded");
    cn_.step(v_);
    ++n_;
    state_ = h_.scatter(v_);
    slice_ = make_field_slice(state_, k_, n_ * dt_);
  }
  void rewind() override {
    n_ = 0;
    v_ = h_.gather(a0_);
    state_ = h_.scatter(v_);
    slice_ = make_field_slice(state_, k_, 0.0);
  }

 private:
  const HermitianOperator& h_;
  SectoredState a0_;
  PhysicalConstants k_;
  CrankNicolson cn_;
  double dt_;
  std::size_t steps_;
  std::size_t n_ = 0;
  VectorXc v_;
  SectoredState state_;
  FieldSlice slice_;
};

// ---------------------------------------------------------------------------
// Trajectories.

enum class JumpKind { absorption, emission };

inline const char* to_string(JumpKind k) { return k == JumpKind::absorption ? "absorption" : "emission"; }

struct JumpEvent {
  double t = 0.0;
  JumpKind kind = JumpKind::absorption;
  double x = 0.0;  // boundary point (x, 0) / sector-1 image x
};

struct TrajectorySample {
  double t;
  int sector;  // 0: line, 1: half-plane
  double x, y;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<JumpEvent> jumps;
  bool censored = false;
  int pauses = 0;
};

/// One Bohmian walker; sector 0 is the line, 1 the half-plane.
struct Walker {
  int sector = 1;
  double x = 0.0, y = 0.0;
  double hazard = 0.0, threshold = 0.0;
  int retries = 0;
  bool censored = false;
  int absorptions = 0, emissions = 0;
};

inline constexpr int kMaxRetries = 3;

enum class StepEvent { none, absorption, emission, paused, censored };

inline const char* to_string(StepEvent e) {
  switch (e) {
    case StepEvent::none: return "";
    case StepEvent::absorption: return "absorption";
    case StepEvent::emission: return "emission";
    case StepEvent::paused: return "paused";
    case StepEvent::censored: return "censored";
  }
  return "";
}

/// Advances `w` from fraction th0 to th1 of the slice interval [a, b] (length
/// dt = (th1 - th0) * interval). Explicit midpoint rule; absorption when the
/// path crosses y = 0 where the boundary flux points into the wall, emission when the integrated rate passes an Exp(1) threshold.
inline StepEvent advance_walker(Walker& w, const detail::SlicePair& p, double th0, double th1, double dt,
                                CounterRng& rng, double* event_fraction = nullptr) {
  if (w.censored) return StepEvent::censored;
  const double thm = 0.5 * (th0 + th1);
  auto pause = [&]() {
    if (++w.retries > kMaxRetries) {
      w.censored = true;
      return StepEvent::censored;
    }
    return StepEvent::paused;
  };
  if (w.sector == 1) {
    const auto v0 = p.velocity2(w.x, w.y, th0);
    if (!v0) return pause();
    const double xm = w.x + 0.5 * dt * v0->x, ym = std::max(w.y + 0.5 * dt * v0->y, 0.0);
    const auto vm = p.velocity2(xm, ym, thm);
    if (!vm) return pause();
    w.retries = 0;
    const double xn = w.x + dt * vm->x, yn = w.y + dt * vm->y;
    if (yn <= 0.0) {
      const double lam = w.y / (w.y - yn);
      const double xc = w.x + lam * (xn - w.x);
      // no inward flux at the crossing: the wall is closed there, reflect
      if (!(p.boundary_flux(xc, th0 + lam * (th1 - th0)) < 0.0)) {
        w.x = xn;
        w.y = std::max(-yn, 1e-9 * p.lat->hy());
        return StepEvent::none;
      }
      w.x = xc;
      w.y = 0.0;
      w.sector = 0;
      w.hazard = 0.0;
      w.threshold = rng.exponential();
      ++w.absorptions;
      if (event_fraction) *event_fraction = th0 + lam * (th1 - th0);
      return StepEvent::absorption;
    }
    w.x = xn;
    w.y = yn;
    return StepEvent::none;
  }
  const auto v0 = p.velocity1(w.x, th0);
  if (!v0) return pause();
  const double xm = w.x + 0.5 * dt * *v0;
  const auto vm = p.velocity1(xm, thm);
  const auto rate = p.rate(xm, thm);
  if (!vm || !rate) return pause();
  w.retries = 0;
  const double h0 = w.hazard;
  w.x += dt * *vm;
  w.hazard += dt * *rate;
  if (w.hazard < w.threshold) return StepEvent::none;
  // Emission at (X, 0), then half a step into the half-plane.
  const double frac = (*rate > 0.0) ? std::clamp((w.threshold - h0) / (dt * *rate), 0.0, 1.0) : 1.0;
  if (event_fraction) *event_fraction = th0 + frac * (th1 - th0);
  w.sector = 1;
  w.y = 0.0;
  w.hazard = 0.0;
  ++w.emissions;
  const auto vb = p.velocity2(w.x, 0.0, th1);
  if (vb) {
    w.x += 0.5 * dt * vb->x;
    w.y = std::max(0.5 * dt * vb->y, 0.0);
  }
  if (w.y <= 0.0) w.y = 1e-9 * p.lat->hy();
  return StepEvent::emission;
}

/// Position drawn from |psi|^2 of the slice: sector by p1, then a cell by
/// weight rho * cell measure, then uniform inside the cell.
inline Walker sample_initial(const FieldSlice& s, const ToyLattice& lat, CounterRng& rng) {
  Walker w;
  w.threshold = rng.exponential();
  auto pick = [&](const std::vector<double>& weights) {
    double total = 0.0;
    for (double v : weights) total += v;
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] <= 0.0) continue;
      u -= weights[i];
      if (u < 0.0) return i;
    }
    std::size_t last = weights.size() - 1;
    while (last > 0 && weights[last] <= 0.0) --last;
    return last;
  };
  if (rng.uniform() < s.p1) {
    w.sector = 0;
    const auto i = pick(s.rho1);
    w.x = -0.5 * lat.width() + (i + 1.0) * lat.hx() + (rng.uniform() - 0.5) * lat.hx();
  } else {
    w.sector = 1;
    std::vector<double> cell(s.rho2.size(), 0.0);
    const int ny = lat.ny();
    for (int i = 0; i < lat.nx(); ++i)
      for (int j = 1; j <= ny; ++j) cell[static_cast<std::size_t>(i) * (ny + 1) + j] = s.rho2[static_cast<std::size_t>(i) * (ny + 1) + j];
    const auto r = pick(cell);
    const int i = static_cast<int>(r / (ny + 1)), j = static_cast<int>(r % (ny + 1));
    w.x = -0.5 * lat.width() + (i + 1.0) * lat.hx() + (rng.uniform() - 0.5) * lat.hx();
    w.y = (j - 1.0 + rng.uniform()) * lat.hy();
    if (w.y <= 0.0) w.y = 1e-9 * lat.hy();
  }
  return w;
}

/// Initial configuration: sector (0 line, 1 half-plane) and position.
struct Configuration {
  int sector = 1;
  double x = 0.0, y = 0.0;
};

/// Single trajectory on `states` from index 0 up to `horizon`. dt must divide
/// the provider step; fields are linear in time between slices.
inline Trajectory simulate_trajectory(StateStream& states, Configuration q0, double dt, double horizon,
                                      std::uint64_t seed, std::uint64_t stream = 0) {
  const double step = states.step();
  const long sub = std::lround(step / dt);
  if (sub < 1 || std::abs(sub * dt - step) > 1e-9 * step) throw StructuralError("dt must divide the provider step");
  const long nsteps = std::lround(horizon / step);
  if (std::abs(nsteps * step - horizon) > 1e-9 * std::max(1.0, horizon))
    throw StructuralError("horizon is not a whole number of provider steps");
  if (static_cast<std::size_t>(nsteps) > states.steps()) throw StructuralError("provider does not cover the horizon");
  if (q0.sector == 1 && q0.y <= 0.0) throw ParameterError("half-plane start needs y > 0");
  states.rewind();
  const ToyLattice lat(states.grids());
  CounterRng rng(seed, stream);
  Walker w;
  w.sector = q0.sector;
  w.x = q0.x;
  w.y = q0.sector == 1 ? q0.y : 0.0;
  w.threshold = rng.exponential();
  Trajectory out;
  out.samples.push_back({0.0, w.sector, w.x, w.y});
  FieldSlice prev = states.slice();
  for (long n = 0; n < nsteps; ++n) {
    states.advance();
    const FieldSlice& next = states.slice();
    const detail::SlicePair pair{&prev, &next, &lat};
    for (long s = 0; s < sub; ++s) {
      const double th0 = static_cast<double>(s) / sub, th1 = static_cast<double>(s + 1) / sub;
      double frac = th1;
      const auto ev = advance_walker(w, pair, th0, th1, dt, rng, &frac);
      const double t0 = prev.t, t = t0 + (s + 1) * dt;
      if (ev == StepEvent::absorption) out.jumps.push_back({t0 + frac * step, JumpKind::absorption, w.x});
      if (ev == StepEvent::emission) out.jumps.push_back({t0 + frac * step, JumpKind::emission, w.x});
      if (ev == StepEvent::paused) ++out.pauses;
      if (ev == StepEvent::censored) {
        out.censored = true;
        return out;
      }
      out.samples.push_back({t, w.sector, w.x, w.y});
    }
    prev = next;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ensemble equivariance.

struct EquivarianceRow {
  double t = 0.0;
  double empirical = 0.0;  // sector-1 fraction among uncensored walkers
  double se = 0.0;         // sqrt(p1 (1 - p1) / n)
  double p1 = 0.0;
  bool flagged = false;
};

struct EquivarianceReport {
  std::vector<EquivarianceRow> rows;
  std::size_t n_traj = 0;
  std::size_t censored = 0;
  double censored_fraction = 0.0;
  std::size_t absorptions = 0, emissions = 0;
  bool valid = true;
  bool passed() const {
    if (!valid) return false;
    for (const auto& r : rows)
      if (r.flagged) return false;
    return true;
  }
};

/// Runs `n_traj` walkers in lockstep with the provider (one step per slice)
/// and compares the empirical sector-1 fraction with p1(t) at `times`. Rows
/// of the first `csv_limit` trajectories go to `csv` ("traj_id,t,sector,x,y,event",
/// sector numbered 1 for the line, 2 for the half-plane).
inline EquivarianceReport equivariance_test(std::size_t n_traj, StateStream& states, std::vector<double> times,
                                            std::uint64_t seed, std::ostream* csv = nullptr,
                                            std::size_t csv_limit = 0) {
  if (n_traj == 0) throw ParameterError("n_traj must be positive");
  std::sort(times.begin(), times.end());
  const double step = states.step();
  std::vector<std::size_t> probe;
  for (double t : times) {
    const long n = std::lround(t / step);
    if (n < 0 || std::abs(n * step - t) > 1e-9 * std::max(1.0, t))
      throw ParameterError("probe time " + std::to_string(t) + " is not on the provider grid");
    if (static_cast<std::size_t>(n) > states.steps()) throw StructuralError("provider does not cover probe times");
    probe.push_back(static_cast<std::size_t>(n));
  }
  states.rewind();
  const ToyLattice lat(states.grids());
  std::vector<Walker> walkers(n_traj);
  std::vector<CounterRng> rngs;
  rngs.reserve(n_traj);
  for (std::size_t i = 0; i < n_traj; ++i) {
    rngs.emplace_back(seed, i);
    walkers[i] = sample_initial(states.slice(), lat, rngs[i]);
  }
  auto write = [&](std::size_t i, double t, StepEvent ev) {
    if (!csv || i >= csv_limit) return;
    const auto& w = walkers[i];
    auto put = [&](double v) {
      char buf[32];
      *csv << std::string_view(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
    };
    *csv << i << ',';
    put(t);
    *csv << ',' << (w.sector + 1) << ',';
    put(w.x);
    *csv << ',';
    if (w.sector == 1) put(w.y);
    *csv << ',' << to_string(ev) << '\n';
  };
  if (csv) *csv << "traj_id,t,sector,x,y,event\n";
  for (std::size_t i = 0; i < std::min(csv_limit, n_traj); ++i) write(i, 0.0, StepEvent::none);

  EquivarianceReport rep;
  rep.n_traj = n_traj;
  auto record = [&](const FieldSlice& s) {
    std::size_t in1 = 0, valid = 0;
    for (const auto& w : walkers) {
      if (w.censored) continue;
      ++valid;
      in1 += w.sector == 0;
    }
    EquivarianceRow r;
    r.t = s.t;
    r.p1 = s.p1;
    r.empirical = valid ? static_cast<double>(in1) / valid : 0.0;
    r.se = valid ? std::sqrt(std::max(s.p1 * (1.0 - s.p1), 0.0) / valid) : 0.0;
    r.flagged = std::abs(r.empirical - r.p1) > 3.0 * r.se;
    rep.rows.push_back(r);
  };
  std::size_t next_probe = 0;
  auto maybe_record = [&](std::size_t n, const FieldSlice& s) {
    while (next_probe < probe.size() && probe[next_probe] == n) {
      record(s);
      ++next_probe;
    }
  };
  maybe_record(0, states.slice());
  const std::size_t last = probe.empty() ? 0 : probe.back();
  FieldSlice prev = states.slice();
  for (std::size_t n = 0; n < last; ++n) {
    states.advance();
    const FieldSlice& next = states.slice();
    const detail::SlicePair pair{&prev, &next, &lat};
    for (std::size_t i = 0; i < n_traj; ++i) {
      const bool was_censored = walkers[i].censored;
      const auto ev = advance_walker(walkers[i], pair, 0.0, 1.0, step, rngs[i]);
      if (!was_censored) write(i, next.t, ev);
    }
    maybe_record(n + 1, next);
    prev = next;
  }
  for (const auto& w : walkers) {
    rep.censored += w.censored;
    rep.absorptions += w.absorptions;
    rep.emissions += w.emissions;
  }
  rep.censored_fraction = static_cast<double>(rep.censored) / n_traj;
  rep.valid = rep.censored_fraction <= 0.01;
  return rep;
}

}  // namespace ibc
