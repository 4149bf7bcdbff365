#pragma once

#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include "json.hpp"

#include "ibc/errors.hpp"
#include "ibc/grid.hpp"

namespace ibc {

using cplx = std::complex<double>;

/// Radial sectors either store psi itself or u = sqrt(4 pi) r psi per radial
/// coordinate, which flattens the measure to plain Lebesgue weights.
enum class Gauge { psi, u_tilde };

inline std::string to_string(Gauge g) { return g == Gauge::psi ? "psi" : "u_tilde"; }

/// Wavefunction over a disjoint union of sectors, one flat complex array per
/// sector laid out as described by the matching GridSpec.
class SectoredState {
 public:
  SectoredState() = default;

  SectoredState(std::vector<GridSpec> grids, Gauge gauge) : grids_(std::move(grids)), gauge_(gauge) {
    sectors_.reserve(grids_.size());
    weights_.reserve(grids_.size());
    for (const auto& g : grids_) {
      sectors_.emplace_back(g.size(), cplx{0.0, 0.0});
      weights_.push_back(g.weights());
    }
  }

  SectoredState(std::vector<GridSpec> grids, std::vector<std::vector<cplx>> data, Gauge gauge)
      : SectoredState(std::move(grids), gauge) {
    if (data.size() != sectors_.size()) throw StructuralError("sector count does not match grids");
    for (std::size_t s = 0; s < data.size(); ++s) {
      if (data[s].size() != sectors_[s].size())
        throw StructuralError("sector " + std::to_string(s) + " array does not match its grid");
      sectors_[s] = std::move(data[s]);
    }
  }

  std::size_t sector_count() const { return sectors_.size(); }
  Gauge gauge() const { return gauge_; }
  const std::vector<GridSpec>& grids() const { return grids_; }
  const GridSpec& grid(std::size_t s) const { return grids_[s]; }
  const std::vector<double>& weights(std::size_t s) const { return weights_[s]; }

  std::vector<cplx>& sector(std::size_t s) { return sectors_[s]; }
  const std::vector<cplx>& sector(std::size_t s) const { return sectors_[s]; }

  SectoredState zeros_like() const { return SectoredState(grids_, gauge_); }

  /// Same grids and gauge.
  bool compatible(const SectoredState& o) const {
    if (gauge_ != o.gauge_ || grids_.size() != o.grids_.size()) return false;
    for (std::size_t s = 0; s < grids_.size(); ++s)
      if (!grids_[s].same_layout(o.grids_[s])) return false;
    return true;
  }

  SectoredState& operator*=(cplx a) {
    for (auto& v : sectors_)
      for (auto& z : v) z *= a;
    return *this;
  }

  SectoredState& axpy(cplx a, const SectoredState& o) {
    require_compatible(o);
    for (std::size_t s = 0; s < sectors_.size(); ++s)
      for (std::size_t i = 0; i < sectors_[s].size(); ++i) sectors_[s][i] += a * o.sectors_[s][i];
    return *this;
  }

  void require_compatible(const SectoredState& o) const {
    if (gauge_ != o.gauge_) throw StructuralError("gauge mismatch");
    if (!compatible(o)) throw StructuralError("sector shape mismatch");
  }

 private:
  std::vector<GridSpec> grids_;
  std::vector<std::vector<cplx>> sectors_;
  std::vector<std::vector<double>> weights_;
  Gauge gauge_ = Gauge::psi;
};

/// Weighted sector-wise inner product, antilinear in the first argument.
inline cplx inner_product(const SectoredState& a, const SectoredState& b) {
  a.require_compatible(b);
  cplx acc{0.0, 0.0};
  for (std::size_t s = 0; s < a.sector_count(); ++s) {
    const auto& w = a.weights(s);
    const auto& x = a.sector(s);
    const auto& y = b.sector(s);
    cplx part{0.0, 0.0};
    for (std::size_t i = 0; i < x.size(); ++i) part += w[i] * std::conj(x[i]) * y[i];
    acc += part;
  }
  return acc;
}

inline double sector_norm2(const SectoredState& a, std::size_t s) {
  const auto& w = a.weights(s);
  const auto& x = a.sector(s);
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * std::norm(x[i]);
  return acc;
}

inline double norm2(const SectoredState& a) {
  double acc = 0.0;
  for (std::size_t s = 0; s < a.sector_count(); ++s) acc += sector_norm2(a, s);
  return acc;
}

/// Probability of each sector; the state must be normalised to 1e-12.
inline std::vector<double> sector_probabilities(const SectoredState& a, double tolerance = 1e-12) {
  std::vector<double> p(a.sector_count());
  for (std::size_t s = 0; s < p.size(); ++s) p[s] = sector_norm2(a, s);
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  if (std::abs(total - 1.0) > tolerance) throw PreconditionError("state is not normalised", std::sqrt(total));
  return p;
}

inline SectoredState normalize(const SectoredState& a) {
  const double n2 = norm2(a);
  if (!(n2 > 0.0)) throw DegenerateInputError("cannot normalise the zero state");
  SectoredState out = a;
  out *= cplx{1.0 / std::sqrt(n2), 0.0};
  return out;
}

// JSON form: {"gauge": ..., "grids": [...], "sectors": [[[re, im], ...], ...]}

inline nlohmann::json grid_to_json(const GridSpec& g) {
  return nlohmann::json{{"kind", to_string(g.kind)}, {"order", g.order}, {"extents", g.extents}, {"spacing", g.spacing}};
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind");
  const auto ext = j.at("extents").get<std::vector<double>>();
  const auto h = j.at("spacing").get<std::vector<double>>();
  if (kind == "line") return GridSpec::line(ext.at(0), h.at(0));
  if (kind == "half-plane") return GridSpec::half_plane(ext.at(0), ext.at(1), h.at(0), h.at(1));
  if (kind == "half-line") return GridSpec::half_line(ext.at(0), h.at(0));
  if (kind == "symmetric-radial-product") return GridSpec::symmetric_product(j.at("order"), ext.at(0), h.at(0));
  throw StructuralError("unknown grid kind '" + kind + "'");
}

inline nlohmann::json to_json(const SectoredState& a) {
  nlohmann::json j;
  j["gauge"] = to_string(a.gauge());
  j["grids"] = nlohmann::json::array();
  j["sectors"] = nlohmann::json::array();
  for (std::size_t s = 0; s < a.sector_count(); ++s) {
    j["grids"].push_back(grid_to_json(a.grid(s)));
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& z : a.sector(s)) arr.push_back({z.real(), z.imag()});
    j["sectors"].push_back(std::move(arr));
  }
  return j;
}

inline SectoredState state_from_json(const nlohmann::json& j) {
  const std::string gname = j.at("gauge");
  if (gname != "psi" && gname != "u_tilde") throw StructuralError("unknown gauge '" + gname + "'");
  std::vector<GridSpec> grids;
  for (const auto& g : j.at("grids")) grids.push_back(grid_from_json(g));
  std::vector<std::vector<cplx>> data;
  for (const auto& arr : j.at("sectors")) {
    std::vector<cplx> v;
    v.reserve(arr.size());
    for (const auto& z : arr) v.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
    data.push_back(std::move(v));
  }
  return SectoredState(std::move(grids), std::move(data), gname == "psi" ? Gauge::psi : Gauge::u_tilde);
}

}  // namespace ibc
