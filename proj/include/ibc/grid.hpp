#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ibc/errors.hpp"

namespace ibc {

enum class GridKind { line, half_plane, half_line, symmetric_radial_product };

inline std::string to_string(GridKind k) {
  switch (k) {
    case GridKind::line: return "line";
    case GridKind::half_plane: return "half-plane";
    case GridKind::half_line: return "half-line";
    case GridKind::symmetric_radial_product: return "symmetric-radial-product";
  }
  return "?";
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

/// Bijection between sorted multi-indices i_0 <= ... <= i_{n-1} over [0, M)
/// and [0, C(M+n-1, n)), using the colex rank of the strictly increasing
/// combination c_k = i_k + k.
class MultisetIndexer {
 public:
  MultisetIndexer() = default;
  MultisetIndexer(int points, int order) : points_(points), order_(order) {
    if (points < 1 || order < 0) throw StructuralError("multiset indexer needs points >= 1, order >= 0");
    const std::uint64_t total = binomial(points + order - 1, order);
    size_ = static_cast<std::size_t>(total);
    const int top = points + order;
    table_.assign(static_cast<std::size_t>(order) * static_cast<std::size_t>(top + 1), 0);
    for (int k = 0; k < order; ++k)
      for (int c = 0; c <= top; ++c) table_[k * (top + 1) + c] = binomial(c, k + 1);
    tuples_.resize(size_ * order_);
    std::vector<int> idx(order_, 0);
    if (order_ == 0) return;
    // Colex enumeration: increment like an odometer on the sorted tuple.
    for (std::size_t r = 0; r < size_; ++r) {
      std::copy(idx.begin(), idx.end(), tuples_.begin() + r * order_);
      int k = 0;
      while (k < order_) {
        const int limit = (k + 1 < order_) ? idx[k + 1] : points_ - 1;
        if (idx[k] < limit) {
          ++idx[k];
          for (int j = 0; j < k; ++j) idx[j] = 0;
          break;
        }
        ++k;
      }
    }
  }

  int points() const { return points_; }
  int order() const { return order_; }
  std::size_t size() const { return size_; }

  /// Rank of a sorted tuple.
  std::size_t rank(std::span<const int> sorted) const {
    const int top = points_ + order_;
    std::uint64_t r = 0;
    for (int k = 0; k < order_; ++k) r += table_[k * (top + 1) + sorted[k] + k];
    return static_cast<std::size_t>(r);
  }

  std::span<const int> tuple(std::size_t rank) const {
    return {tuples_.data() + rank * order_, static_cast<std::size_t>(order_)};
  }

  /// n! / prod(counts!) : number of ordered tuples represented by a sorted one.
  static double multiplicity(std::span<const int> sorted) {
    double m = 1.0;
    int run = 1;
    for (std::size_t k = 1; k <= sorted.size(); ++k) {
      m *= static_cast<double>(k);
      if (k < sorted.size() && sorted[k] == sorted[k - 1]) {
        ++run;
      } else {
        for (int q = 2; q <= run; ++q) m /= q;
        run = 1;
      }
    }
    return m;
  }

 private:
  int points_ = 1;
  int order_ = 0;
  std::size_t size_ = 1;
  std::vector<std::uint64_t> table_;
  std::vector<int> tuples_;
};

/// Discretisation of one configuration-space sector. Outer truncation walls
/// are hard (homogeneous Dirichlet).
///
/// line: x in (-W/2, W/2), node-based, walls excluded, nodes x_i = -W/2 + i h.
/// half-plane: line axis in x times a half axis in y.
/// half-line: half axis, index 0 is the physical boundary r = 0 (weight 0),
///   index j >= 1 is the cell centre (j - 1/2) h.
/// symmetric-radial-product(n): sorted n-tuples over the half axis, each tuple
///   weighted by its multiplicity times h^n (0 when it touches the boundary).
struct GridSpec {
  GridKind kind = GridKind::line;
  int order = 1;
  std::vector<double> extents;
  std::vector<double> spacing;
  std::shared_ptr<const MultisetIndexer> indexer;

  static GridSpec line(double width, double h) {
    GridSpec g;
    g.kind = GridKind::line;
    g.extents = {width};
    g.spacing = {h};
    g.validate();
    return g;
  }
  static GridSpec half_plane(double width, double height, double hx, double hy) {
    GridSpec g;
    g.kind = GridKind::half_plane;
    g.order = 2;
    g.extents = {width, height};
    g.spacing = {hx, hy};
    g.validate();
    return g;
  }
  static GridSpec half_line(double length, double h) {
    GridSpec g;
    g.kind = GridKind::half_line;
    g.extents = {length};
    g.spacing = {h};
    g.validate();
    return g;
  }
  static GridSpec symmetric_product(int n, double length, double h) {
    GridSpec g;
    g.kind = GridKind::symmetric_radial_product;
    g.order = n;
    g.extents = {length};
    g.spacing = {h};
    g.validate();
    g.indexer = std::make_shared<MultisetIndexer>(g.cells(0) + 1, n);
    return g;
  }

  void validate() const {
    if (extents.size() != spacing.size() || extents.empty()) throw StructuralError("grid extents/spacing mismatch");
    for (std::size_t a = 0; a < extents.size(); ++a) {
      if (!(spacing[a] > 0.0)) throw StructuralError("grid spacing must be positive");
      const double ratio = extents[a] / spacing[a];
      if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio) || std::round(ratio) < 2)
        throw StructuralError("grid extent must be an integer multiple (>= 2) of the spacing");
    }
    if (kind == GridKind::symmetric_radial_product && order < 0) throw StructuralError("negative product order");
  }

  int cells(int axis) const { return static_cast<int>(std::lround(extents[axis] / spacing[axis])); }

  /// Number of stored x nodes of a line axis (walls excluded).
  int line_nodes() const { return cells(0) - 1; }
  /// Number of stored half-axis nodes including the boundary index 0.
  int half_nodes(int axis) const { return cells(axis) + 1; }

  std::vector<int> shape() const {
    switch (kind) {
      case GridKind::line: return {line_nodes()};
      case GridKind::half_plane: return {line_nodes(), half_nodes(1)};
      case GridKind::half_line: return {half_nodes(0)};
      case GridKind::symmetric_radial_product: return {static_cast<int>(indexer ? indexer->size() : 1)};
    }
    return {};
  }

  std::size_t size() const {
    std::size_t s = 1;
    for (int d : shape()) s *= static_cast<std::size_t>(d);
    return s;
  }

  double x_node(int i) const { return -0.5 * extents[0] + (i + 1) * spacing[0]; }
  double half_node(int j, int axis = 0) const { return j == 0 ? 0.0 : (j - 0.5) * spacing[axis]; }

  /// Flat index of half-plane node (i, j).
  std::size_t at(int i, int j) const { return static_cast<std::size_t>(i) * half_nodes(1) + j; }

  /// Midpoint-rule quadrature weights realising the sector measure.
  std::vector<double> weights() const {
    std::vector<double> w(size(), 0.0);
    switch (kind) {
      case GridKind::line:
        std::fill(w.begin(), w.end(), spacing[0]);
        break;
      case GridKind::half_plane: {
        const int ny = half_nodes(1);
        for (int i = 0; i < line_nodes(); ++i)
          for (int j = 1; j < ny; ++j) w[at(i, j)] = spacing[0] * spacing[1];
        break;
      }
      case GridKind::half_line:
        std::fill(w.begin() + 1, w.end(), spacing[0]);
        break;
      case GridKind::symmetric_radial_product: {
        const double hn = std::pow(spacing[0], order);
        for (std::size_t r = 0; r < w.size(); ++r) {
          auto t = indexer->tuple(r);
          if (order > 0 && t[0] == 0) continue;
          w[r] = MultisetIndexer::multiplicity(t) * hn;
        }
        break;
      }
    }
    return w;
  }

  bool same_layout(const GridSpec& o) const {
    if (kind != o.kind || order != o.order || extents.size() != o.extents.size()) return false;
    for (std::size_t a = 0; a < extents.size(); ++a)
      if (std::abs(extents[a] - o.extents[a]) > 1e-12 || std::abs(spacing[a] - o.spacing[a]) > 1e-12) return false;
    return true;
  }
};

}  // namespace ibc
