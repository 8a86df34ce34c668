#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "xmed/errors.hpp"

namespace xmed {

using NodeIndex = std::int64_t;

// Geometry of an N-dimensional Cartesian lattice. Row-major with the LAST
// axis fastest-varying; this layout is fixed across the snapshot format.
// Immutable after construction.
class GridSpec {
 public:
  GridSpec(std::vector<std::int64_t> shape, double spacing,
           std::vector<double> origin = {})
      : shape_(std::move(shape)), spacing_(spacing), origin_(std::move(origin)) {
    if (shape_.empty()) throw ConfigError("grid: ndim must be >= 1");
    for (auto n : shape_)
      if (n < 3)
        throw ConfigError("grid: every shape entry must be >= 3, got " +
                          std::to_string(n));
    if (!(spacing_ > 0.0)) throw ConfigError("grid: spacing must be > 0");
    if (origin_.empty()) origin_.assign(shape_.size(), 0.0);
    if (origin_.size() != shape_.size())
      throw ConfigError("grid: origin length must equal ndim");

    strides_.assign(shape_.size(), 1);
    for (int k = static_cast<int>(shape_.size()) - 2; k >= 0; --k) {
      strides_[k] = strides_[k + 1] * shape_[k + 1];
      if (strides_[k] > (std::int64_t{1} << 62) / shape_[k])
        throw ConfigError("grid: node count exceeds address space");
    }
    node_count_ = strides_[0] * shape_[0];
  }

  int ndim() const { return static_cast<int>(shape_.size()); }
  const std::vector<std::int64_t>& shape() const { return shape_; }
  double spacing() const { return spacing_; }
  const std::vector<double>& origin() const { return origin_; }
  const std::vector<std::int64_t>& strides() const { return strides_; }
  NodeIndex node_count() const { return node_count_; }

  NodeIndex flat_index(std::span<const std::int64_t> coords) const {
    if (static_cast<int>(coords.size()) != ndim())
      throw std::out_of_range("flat_index: coordinate rank mismatch");
    NodeIndex idx = 0;
    for (int k = 0; k < ndim(); ++k) {
      if (coords[k] < 0 || coords[k] >= shape_[k])
        throw std::out_of_range("flat_index: coordinate " + std::to_string(k) +
                                " out of range");
      idx += coords[k] * strides_[k];
    }
    return idx;
  }

  void unflatten(NodeIndex node, std::span<std::int64_t> out) const {
    if (node < 0 || node >= node_count_)
      throw std::out_of_range("unflatten: node index out of range");
    for (int k = 0; k < ndim(); ++k) {
      out[k] = node / strides_[k];
      node -= out[k] * strides_[k];
    }
  }

  std::vector<std::int64_t> unflatten(NodeIndex node) const {
    std::vector<std::int64_t> c(ndim());
    unflatten(node, c);
    return c;
  }

  double coord_mm(int axis, std::int64_t index) const {
    return origin_[axis] + static_cast<double>(index) * spacing_;
  }

  std::vector<double> position_mm(NodeIndex node) const {
    auto c = unflatten(node);
    std::vector<double> p(ndim());
    for (int k = 0; k < ndim(); ++k) p[k] = coord_mm(k, c[k]);
    return p;
  }

  bool same_lattice(const GridSpec& other) const {
    return shape_ == other.shape_ && spacing_ == other.spacing_ &&
           origin_ == other.origin_;
  }

 private:
  std::vector<std::int64_t> shape_;
  double spacing_;
  std::vector<double> origin_;
  std::vector<std::int64_t> strides_;
  NodeIndex node_count_ = 0;
};

// ---------------------------------------------------------------------------
// Regions (stimulus targets, obstacles). All boundaries are closed (<=).

struct BoxRegion {
  std::vector<double> lo, hi;  // per-axis closed intervals in mm
};

struct BallRegion {
  std::vector<double> center;  // mm
  double radius = 0.0;         // mm
};

// All nodes with (x[axis_a]-center_a)^2 + (x[axis_b]-center_b)^2 <= r^2;
// unconstrained along every other axis.
struct HypercylinderRegion {
  int axis_a = 0, axis_b = 1;
  double center_a = 0.0, center_b = 0.0;
  double radius = 0.0;
};

// Ball of radius r swept along the segment p0..p1 (a capsule).
struct CapsuleRegion {
  std::vector<double> p0, p1;
  double radius = 0.0;
};

using RegionSpec =
    std::variant<BoxRegion, BallRegion, HypercylinderRegion, CapsuleRegion>;

inline void validate_region(const RegionSpec& region, int ndim) {
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, BoxRegion>) {
          if (static_cast<int>(r.lo.size()) != ndim ||
              static_cast<int>(r.hi.size()) != ndim)
            throw ConfigError("box region: lo/hi length must equal ndim");
          for (int k = 0; k < ndim; ++k)
            if (r.lo[k] > r.hi[k])
              throw ConfigError("box region: empty interval on axis " +
                                std::to_string(k));
        } else if constexpr (std::is_same_v<T, BallRegion>) {
          if (static_cast<int>(r.center.size()) != ndim)
            throw ConfigError("ball region: center length must equal ndim");
          if (!(r.radius > 0.0)) throw ConfigError("ball region: radius must be > 0");
        } else if constexpr (std::is_same_v<T, HypercylinderRegion>) {
          if (r.axis_a < 0 || r.axis_a >= ndim || r.axis_b < 0 ||
              r.axis_b >= ndim || r.axis_a == r.axis_b)
            throw ConfigError("hypercylinder region: invalid axis pair");
          if (!(r.radius > 0.0))
            throw ConfigError("hypercylinder region: radius must be > 0");
        } else if constexpr (std::is_same_v<T, CapsuleRegion>) {
          if (static_cast<int>(r.p0.size()) != ndim ||
              static_cast<int>(r.p1.size()) != ndim)
            throw ConfigError("capsule region: endpoint length must equal ndim");
          if (!(r.radius > 0.0))
            throw ConfigError("capsule region: radius must be > 0");
        }
      },
      region);
}

inline bool region_contains(const RegionSpec& region,
                            std::span<const double> p) {
  return std::visit(
      [&](const auto& r) -> bool {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, BoxRegion>) {
          for (std::size_t k = 0; k < p.size(); ++k)
            if (p[k] < r.lo[k] || p[k] > r.hi[k]) return false;
          return true;
        } else if constexpr (std::is_same_v<T, BallRegion>) {
          double d2 = 0.0;
          for (std::size_t k = 0; k < p.size(); ++k) {
            const double d = p[k] - r.center[k];
            d2 += d * d;
          }
          return d2 <= r.radius * r.radius;
        } else if constexpr (std::is_same_v<T, HypercylinderRegion>) {
          const double da = p[r.axis_a] - r.center_a;
          const double db = p[r.axis_b] - r.center_b;
          return da * da + db * db <= r.radius * r.radius;
        } else {
          // capsule: squared distance from p to segment p0..p1
          double seg2 = 0.0, dot = 0.0;
          for (std::size_t k = 0; k < p.size(); ++k) {
            const double e = r.p1[k] - r.p0[k];
            seg2 += e * e;
            dot += (p[k] - r.p0[k]) * e;
          }
          double t = seg2 > 0.0 ? dot / seg2 : 0.0;
          t = std::clamp(t, 0.0, 1.0);
          double d2 = 0.0;
          for (std::size_t k = 0; k < p.size(); ++k) {
            const double d = p[k] - (r.p0[k] + t * (r.p1[k] - r.p0[k]));
            d2 += d * d;
          }
          return d2 <= r.radius * r.radius;
        }
      },
      region);
}

// Boolean mask of nodes whose physical coordinate satisfies the region.
inline std::vector<std::uint8_t> region_mask(const GridSpec& grid,
                                             const RegionSpec& region) {
  validate_region(region, grid.ndim());
  const int nd = grid.ndim();
  std::vector<std::uint8_t> out(grid.node_count(), 0);
  std::vector<std::int64_t> c(nd, 0);
  std::vector<double> p(nd);
  for (int k = 0; k < nd; ++k) p[k] = grid.coord_mm(k, 0);
  for (NodeIndex i = 0; i < grid.node_count(); ++i) {
    out[i] = region_contains(region, p) ? 1 : 0;
    // odometer increment, last axis fastest
    for (int k = nd - 1; k >= 0; --k) {
      if (++c[k] < grid.shape()[k]) {
        p[k] = grid.coord_mm(k, c[k]);
        break;
      }
      c[k] = 0;
      p[k] = grid.coord_mm(k, 0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

// Which nodes conduct. Inactive nodes are inert obstacles: no diffusion
// edges and no kinetics.
class ConductionMask {
 public:
  ConductionMask(GridSpec grid, std::vector<std::uint8_t> active)
      : grid_(std::move(grid)), active_(std::move(active)) {
    if (static_cast<NodeIndex>(active_.size()) != grid_.node_count())
      throw ConfigError("mask: length must equal node count");
    NodeIndex n_active = 0;
    for (auto a : active_) n_active += (a != 0);
    if (n_active == 0) throw ConfigError("mask: at least one node must be active");
    all_active_ = n_active == grid_.node_count();
  }

  static ConductionMask all_active(const GridSpec& grid) {
    return ConductionMask(grid,
                          std::vector<std::uint8_t>(grid.node_count(), 1));
  }

  const GridSpec& grid() const { return grid_; }
  bool active(NodeIndex node) const { return active_[node] != 0; }
  bool all() const { return all_active_; }
  const std::vector<std::uint8_t>& data() const { return active_; }

 private:
  GridSpec grid_;
  std::vector<std::uint8_t> active_;
  bool all_active_ = false;
};

// Active axis-adjacent nodes, ordered axis 0 minus, axis 0 plus, axis 1
// minus, ... Boundary and masked neighbors are simply absent, which
// realizes the no-flux condition by neighbor omission.
inline std::vector<NodeIndex> neighbors(const GridSpec& grid,
                                        const ConductionMask& mask,
                                        NodeIndex node) {
  if (!mask.active(node))
    throw ContractError("neighbors: node " + std::to_string(node) +
                        " is not active");
  auto c = grid.unflatten(node);
  std::vector<NodeIndex> out;
  out.reserve(2 * grid.ndim());
  for (int k = 0; k < grid.ndim(); ++k) {
    if (c[k] > 0) {
      const NodeIndex j = node - grid.strides()[k];
      if (mask.active(j)) out.push_back(j);
    }
    if (c[k] + 1 < grid.shape()[k]) {
      const NodeIndex j = node + grid.strides()[k];
      if (mask.active(j)) out.push_back(j);
    }
  }
  return out;
}

// Sparse adjacency realization of the lattice, CSR rows per node. Inactive
// nodes get empty rows. coupling_weight is the edge weight 1/h^2.
struct LatticeGraph {
  NodeIndex node_count = 0;
  std::vector<std::int64_t> offsets;      // node_count + 1
  std::vector<std::uint32_t> neighbor_indices;
  double coupling_weight = 0.0;           // mm^-2
};

inline LatticeGraph build_graph(const GridSpec& grid,
                                const ConductionMask& mask) {
  if (grid.node_count() > std::numeric_limits<std::uint32_t>::max())
    throw ConfigError("build_graph: node count too large for graph backend");
  LatticeGraph g;
  g.node_count = grid.node_count();
  g.coupling_weight = 1.0 / (grid.spacing() * grid.spacing());
  g.offsets.assign(g.node_count + 1, 0);
  for (NodeIndex i = 0; i < g.node_count; ++i) {
    if (mask.active(i))
      g.offsets[i + 1] = static_cast<std::int64_t>(neighbors(grid, mask, i).size());
  }
  for (NodeIndex i = 0; i < g.node_count; ++i) g.offsets[i + 1] += g.offsets[i];
  g.neighbor_indices.resize(g.offsets[g.node_count]);
  for (NodeIndex i = 0; i < g.node_count; ++i) {
    if (!mask.active(i)) continue;
    auto nbr = neighbors(grid, mask, i);
    std::transform(nbr.begin(), nbr.end(),
                   g.neighbor_indices.begin() + g.offsets[i],
                   [](NodeIndex j) { return static_cast<std::uint32_t>(j); });
  }
  return g;
}

}  // namespace xmed
