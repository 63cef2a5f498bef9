#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "heatrec/rng.hpp"
#include "heatrec/types.hpp"

namespace heatrec {

// Rectangular plate, node-centred grid. Column c sits at u = c*du from the
// left edge, row r at v = r*dv from the top edge, so corner nodes lie exactly
// on the domain boundary. The heat sink is a segment of the left edge centred
// at sink_center (fraction of the height, measured from the top) and held at
// ref_temp_K; the rest of the boundary is adiabatic.
struct DomainSpec {
  double width_m = 0.2;
  double height_m = 0.2;
  int grid_w = 200;
  int grid_h = 200;
  double sink_center = 0.5;
  double sink_width_m = 0.02;
  double ref_temp_K = 298.0;

  double du() const { return width_m / (grid_w - 1); }
  double dv() const { return height_m / (grid_h - 1); }
  double u_at(int c) const { return c * du(); }
  double v_at(int r) const { return r * dv(); }

  void validate() const {
    if (!(width_m > 0.0)) throw ConfigError("domain.width_m: must be > 0");
    if (!(height_m > 0.0)) throw ConfigError("domain.height_m: must be > 0");
    if (grid_w < 3) throw ConfigError("domain.grid_w: must be >= 3");
    if (grid_h < 3) throw ConfigError("domain.grid_h: must be >= 3");
    if (!(sink_width_m > 0.0) || sink_width_m > height_m)
      throw ConfigError("domain.sink_width_m: must be in (0, height_m]");
    if (sink_center < 0.0 || sink_center > 1.0)
      throw ConfigError("domain.sink_center: must be in [0, 1]");
    const double lo = sink_center * height_m - 0.5 * sink_width_m;
    const double hi = sink_center * height_m + 0.5 * sink_width_m;
    if (lo < -1e-12 || hi > height_m + 1e-12)
      throw ConfigError("domain.sink_center: sink segment leaves the left edge");
    if (!(ref_temp_K > 0.0)) throw ConfigError("domain.ref_temp_K: must be > 0");
  }
};

enum class ShapeKind { rectangle, circle, capsule };
enum class CapsuleAxis { horizontal, vertical };

// One heat-emitting component. Centre and dimensions are in metres;
// containment tests are inclusive of the outline so rasterization is
// deterministic for nodes exactly on it.
struct HeatSourceShape {
  ShapeKind kind = ShapeKind::rectangle;
  double center_u = 0.0;
  double center_v = 0.0;
  double extent_u = 0.0;  // rectangle: full width
  double extent_v = 0.0;  // rectangle: full height
  double radius = 0.0;    // circle and capsule
  double length = 0.0;    // capsule: end-to-end, caps included
  CapsuleAxis axis = CapsuleAxis::horizontal;
  double nominal_power_W = 0.0;

  bool contains(double u, double v) const {
    const double pu = u - center_u;
    const double pv = v - center_v;
    switch (kind) {
      case ShapeKind::rectangle:
        return std::abs(pu) <= 0.5 * extent_u && std::abs(pv) <= 0.5 * extent_v;
      case ShapeKind::circle:
        return pu * pu + pv * pv <= radius * radius;
      case ShapeKind::capsule: {
        const double half_seg = 0.5 * length - radius;
        const double along = (axis == CapsuleAxis::horizontal) ? pu : pv;
        const double across = (axis == CapsuleAxis::horizontal) ? pv : pu;
        const double d = std::max(std::abs(along) - half_seg, 0.0);
        return d * d + across * across <= radius * radius;
      }
    }
    return false;
  }

  // Tight bounds, used for the inside-the-domain check.
  void bounds(double& u0, double& u1, double& v0, double& v1) const {
    double hu = 0.0, hv = 0.0;
    switch (kind) {
      case ShapeKind::rectangle:
        hu = 0.5 * extent_u;
        hv = 0.5 * extent_v;
        break;
      case ShapeKind::circle:
        hu = hv = radius;
        break;
      case ShapeKind::capsule:
        hu = (axis == CapsuleAxis::horizontal) ? 0.5 * length : radius;
        hv = (axis == CapsuleAxis::horizontal) ? radius : 0.5 * length;
        break;
    }
    u0 = center_u - hu;
    u1 = center_u + hu;
    v0 = center_v - hv;
    v1 = center_v + hv;
  }

  void validate(const DomainSpec& spec, std::size_t index) const {
    const std::string tag = "source " + std::to_string(index);
    switch (kind) {
      case ShapeKind::rectangle:
        if (!(extent_u > 0.0) || !(extent_v > 0.0))
          throw GeometryError(tag + ": rectangle extents must be > 0");
        break;
      case ShapeKind::circle:
        if (!(radius > 0.0)) throw GeometryError(tag + ": radius must be > 0");
        break;
      case ShapeKind::capsule:
        if (!(radius > 0.0)) throw GeometryError(tag + ": radius must be > 0");
        if (length < 2.0 * radius)
          throw GeometryError(tag + ": capsule length must be >= 2*radius");
        break;
    }
    double u0, u1, v0, v1;
    bounds(u0, u1, v0, v1);
    const double eps = 1e-12;
    if (u0 < -eps || u1 > spec.width_m + eps || v0 < -eps ||
        v1 > spec.height_m + eps)
      throw GeometryError(tag + ": extends outside the domain");
  }
};

// Monitoring-point layout: grid coordinates (row, col) plus named groups that
// noise specs and reports refer to. Groups hold indices into points.
struct SensorLayout {
  std::vector<std::pair<int, int>> points;
  std::map<std::string, std::vector<int>> groups;

  void validate(const DomainSpec& spec) const {
    if (points.empty()) throw ConfigError("sensors.points: must be non-empty");
    std::set<std::pair<int, int>> seen;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& [r, c] = points[i];
      if (r < 0 || r >= spec.grid_h || c < 0 || c >= spec.grid_w)
        throw ConfigError("sensors.points[" + std::to_string(i) +
                          "]: outside the grid");
      if (!seen.insert(points[i]).second)
        throw ConfigError("sensors.points[" + std::to_string(i) +
                          "]: duplicate coordinate");
    }
    for (const auto& [name, idx] : groups) {
      for (const int j : idx) {
        if (j < 0 || static_cast<std::size_t>(j) >= points.size())
          throw ConfigError("sensors.groups." + name +
                            ": index out of range");
      }
    }
  }

  const std::vector<int>& group(const std::string& name) const {
    const auto it = groups.find(name);
    if (it == groups.end())
      throw ConfigError("sensors.groups." + name + ": unknown group");
    return it->second;
  }
};

// The three cell sets every loss term and report needs. mp = monitoring
// points, nc = interior cells governed by the conduction equation (heat-source
// cells and the outermost ring excluded), bc = sink cells on the left edge.
struct RegionMasks {
  BoolGrid mp_mask;
  BoolGrid nc_mask;
  BoolGrid bc_mask;
  Eigen::Index n_mp = 0;
  Eigen::Index n_nc = 0;
  Eigen::Index n_bc = 0;
};

inline BoolGrid rasterize_shape(const DomainSpec& spec,
                                const HeatSourceShape& shape) {
  BoolGrid mask = BoolGrid::Constant(spec.grid_h, spec.grid_w, false);
  for (int r = 0; r < spec.grid_h; ++r)
    for (int c = 0; c < spec.grid_w; ++c)
      if (shape.contains(spec.u_at(c), spec.v_at(r))) mask(r, c) = true;
  return mask;
}

inline BoolGrid rasterize_sources(const DomainSpec& spec,
                                  const std::vector<HeatSourceShape>& sources) {
  spec.validate();
  BoolGrid mask = BoolGrid::Constant(spec.grid_h, spec.grid_w, false);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    sources[i].validate(spec, i);
    mask = mask || rasterize_shape(spec, sources[i]);
  }
  return mask;
}

// Rows of the left edge covered by the sink segment. If the segment is so
// narrow that no node falls inside it, the nearest node is used so the sink
// never vanishes from the grid.
inline std::vector<int> sink_rows(const DomainSpec& spec) {
  const double center = spec.sink_center * spec.height_m;
  const double half = 0.5 * spec.sink_width_m;
  std::vector<int> rows;
  for (int r = 0; r < spec.grid_h; ++r)
    if (std::abs(spec.v_at(r) - center) <= half + 1e-12) rows.push_back(r);
  if (rows.empty()) {
    int best = 0;
    for (int r = 1; r < spec.grid_h; ++r)
      if (std::abs(spec.v_at(r) - center) < std::abs(spec.v_at(best) - center))
        best = r;
    rows.push_back(best);
  }
  return rows;
}

inline RegionMasks build_masks(const DomainSpec& spec,
                               const std::vector<HeatSourceShape>& sources,
                               const SensorLayout& layout) {
  spec.validate();
  layout.validate(spec);
  RegionMasks m;
  m.mp_mask = BoolGrid::Constant(spec.grid_h, spec.grid_w, false);
  for (const auto& [r, c] : layout.points) m.mp_mask(r, c) = true;

  const BoolGrid src = rasterize_sources(spec, sources);
  m.nc_mask = BoolGrid::Constant(spec.grid_h, spec.grid_w, false);
  for (int r = 1; r < spec.grid_h - 1; ++r)
    for (int c = 1; c < spec.grid_w - 1; ++c)
      if (!src(r, c)) m.nc_mask(r, c) = true;

  m.bc_mask = BoolGrid::Constant(spec.grid_h, spec.grid_w, false);
  for (const int r : sink_rows(spec)) m.bc_mask(r, 0) = true;

  m.n_mp = m.mp_mask.count();
  m.n_nc = m.nc_mask.count();
  m.n_bc = m.bc_mask.count();
  return m;
}

// One power draw per source, N(mean, std^2), in declaration order.
inline std::vector<double> sample_source_powers(
    const std::vector<HeatSourceShape>& sources, double power_mean_W,
    double power_std_W, std::uint64_t seed) {
  if (!(power_std_W >= 0.0))
    throw DomainError("sample_source_powers: power_std_W must be >= 0");
  Rng rng(seed);
  std::vector<double> powers(sources.size());
  for (auto& p : powers) p = rng.normal(power_mean_W, power_std_W);
  return powers;
}

}  // namespace heatrec
