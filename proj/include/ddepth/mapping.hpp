#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "ddepth/distribution.hpp"
#include "ddepth/error.hpp"
#include "ddepth/geometry.hpp"

namespace ddepth {

/// Log-odds update constants. hit/miss are added once per scan per cell.
struct OccupancyParams {
  double hit = 0.85;
  double miss = -0.4;
  double clamp_min = -3.5;
  double clamp_max = 3.5;

  friend bool operator==(const OccupancyParams&, const OccupancyParams&) = default;
};

enum class CellState { unknown, free, occupied };

struct VoxelIndex {
  int x = 0;
  int y = 0;
  int z = 0;

  int operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
  int& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }
  friend bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

/// Dense log-odds occupancy grid over an axis-aligned region. The prior is 0.
class VoxelGrid {
 public:
  VoxelGrid(double resolution, Aabb bounds, OccupancyParams params = {})
      : resolution_(resolution), bounds_(bounds), params_(params) {
    require(resolution_ > 0.0 && std::isfinite(resolution_), "voxel grid: resolution must be > 0");
    require(bounds_.valid(), "voxel grid: empty bounds");
    require(params_.clamp_min < 0.0 && params_.clamp_max > 0.0, "voxel grid: clamp range must straddle 0");
    for (int a = 0; a < 3; ++a) {
      dims_[a] = std::max(1, static_cast<int>(std::ceil((bounds_.max[a] - bounds_.min[a]) / resolution_ - 1e-9)));
    }
    cells_.assign(static_cast<std::size_t>(dims_.x) * dims_.y * dims_.z, 0.0);
  }

  double resolution() const { return resolution_; }
  const Aabb& bounds() const { return bounds_; }
  const OccupancyParams& params() const { return params_; }
  VoxelIndex dims() const { return dims_; }
  std::size_t cell_count() const { return cells_.size(); }

  bool in_grid(VoxelIndex v) const {
    return v.x >= 0 && v.y >= 0 && v.z >= 0 && v.x < dims_.x && v.y < dims_.y && v.z < dims_.z;
  }

  std::size_t linear(VoxelIndex v) const {
    return (static_cast<std::size_t>(v.z) * dims_.y + v.y) * dims_.x + v.x;
  }

  VoxelIndex unlinear(std::size_t i) const {
    const int x = static_cast<int>(i % dims_.x);
    const int y = static_cast<int>((i / dims_.x) % dims_.y);
    const int z = static_cast<int>(i / (static_cast<std::size_t>(dims_.x) * dims_.y));
    return {x, y, z};
  }

  /// Unclamped cell coordinates of a point.
  VoxelIndex floor_index(Vec3 p) const {
    VoxelIndex v;
    for (int a = 0; a < 3; ++a) v[a] = static_cast<int>(std::floor((p[a] - bounds_.min[a]) / resolution_));
    return v;
  }

  std::optional<VoxelIndex> voxel_of(Vec3 p) const {
    const VoxelIndex v = floor_index(p);
    if (!in_grid(v)) return std::nullopt;
    return v;
  }

  Vec3 cell_center(VoxelIndex v) const {
    return {bounds_.min.x + (v.x + 0.5) * resolution_, bounds_.min.y + (v.y + 0.5) * resolution_,
            bounds_.min.z + (v.z + 0.5) * resolution_};
  }

  Aabb cell_box(VoxelIndex v) const {
    const Vec3 lo{bounds_.min.x + v.x * resolution_, bounds_.min.y + v.y * resolution_,
                  bounds_.min.z + v.z * resolution_};
    return {lo, lo + Vec3{resolution_, resolution_, resolution_}};
  }

  double logodds(VoxelIndex v) const { return cells_[linear(v)]; }
  double logodds(std::size_t i) const { return cells_[i]; }
  std::span<const double> logodds() const { return cells_; }

  void set(std::size_t i, double value) { cells_[i] = std::clamp(value, params_.clamp_min, params_.clamp_max); }
  void add(std::size_t i, double delta) { set(i, cells_[i] + delta); }

  CellState state(std::size_t i) const {
    const double l = cells_[i];
    return l > 0.0 ? CellState::occupied : (l < 0.0 ? CellState::free : CellState::unknown);
  }
  CellState state(VoxelIndex v) const { return state(linear(v)); }

  std::size_t count(CellState s) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < cells_.size(); ++i) n += state(i) == s ? 1 : 0;
    return n;
  }

  bool same_layout(const VoxelGrid& o) const {
    return resolution_ == o.resolution_ && bounds_ == o.bounds_ && dims_ == o.dims_;
  }

 private:
  double resolution_;
  Aabb bounds_;
  OccupancyParams params_;
  VoxelIndex dims_;
  std::vector<double> cells_;
};

/**
 * Exact voxel walk (Amanatides & Woo) along the segment origin -> end,
 * clipped to the grid. Consecutive entries differ in one axis by one cell.
 * When end lies inside the grid it is the last entry.
 */
inline std::vector<VoxelIndex> traverse(const VoxelGrid& grid, Vec3 origin, Vec3 end) {
  std::vector<VoxelIndex> out;
  const Vec3 dir = end - origin;
  double t_enter = 0.0;
  double t_exit = 0.0;
  if (!ray_box(origin, dir, grid.bounds(), t_enter, t_exit)) return out;
  const double t0 = std::max(0.0, t_enter);
  const double t1 = std::min(1.0, t_exit);
  if (t0 > t1) return out;

  const VoxelIndex dims = grid.dims();
  auto clamp_index = [&](VoxelIndex v) {
    for (int a = 0; a < 3; ++a) v[a] = std::clamp(v[a], 0, dims[a] - 1);
    return v;
  };
  VoxelIndex cur = clamp_index(grid.floor_index(origin + t0 * dir));
  const std::optional<VoxelIndex> last = grid.voxel_of(end);

  const double res = grid.resolution();
  int step[3];
  double t_max[3];
  double t_delta[3];
  for (int a = 0; a < 3; ++a) {
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_max[a] = (grid.bounds().min[a] + (cur[a] + 1) * res - origin[a]) / dir[a];
      t_delta[a] = res / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (grid.bounds().min[a] + cur[a] * res - origin[a]) / dir[a];
      t_delta[a] = -res / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = INFINITY;
      t_delta[a] = INFINITY;
    }
  }

  for (;;) {
    out.push_back(cur);
    if (last && cur == *last) return out;
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    if (t_max[axis] > t1) break;
    cur[axis] += step[axis];
    if (!grid.in_grid(cur)) break;
    t_max[axis] += t_delta[axis];
  }
  // rounding can stop the walk one cell short of the endpoint cell
  if (last && !(out.back() == *last)) out.push_back(*last);
  return out;
}

/// Depth image in row-major order; non-finite or nonpositive entries carry no return.
struct DepthImage {
  int height = 0;
  int width = 0;
  std::vector<double> depth;

  double at(int row, int col) const { return depth[static_cast<std::size_t>(row) * width + col]; }
};

/**
 * Fuses one depth image. Each unmasked pixel with a return casts a ray from
 * the camera center to its 3D point; cells along the ray are free, the end
 * cell occupied. Within one call each cell receives at most one update and
 * occupied wins over free.
 */
inline void integrate_depth_map(VoxelGrid& grid, const DepthImage& image, const CameraPose& pose,
                                const Intrinsics& intrinsics, std::span<const std::uint8_t> mask = {}) {
  intrinsics.validate();
  require(image.height == intrinsics.height && image.width == intrinsics.width,
          "integrate_depth_map: image size does not match intrinsics");
  require(image.depth.size() == static_cast<std::size_t>(image.height) * image.width,
          "integrate_depth_map: depth buffer size mismatch");
  require(mask.empty() || mask.size() == image.depth.size(), "integrate_depth_map: mask size mismatch");
  pose.validate();

  enum : std::uint8_t { kUntouched = 0, kFree = 1, kOccupied = 2 };
  std::vector<std::uint8_t> marks(grid.cell_count(), kUntouched);
  const Vec3 origin = pose.translation;
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * image.width + c;
      if (!mask.empty() && !mask[i]) continue;
      const double d = image.depth[i];
      if (!std::isfinite(d) || d <= 0.0) continue;
      const Vec3 end = pose.to_world(d * intrinsics.ray(c, r));
      const auto cells = traverse(grid, origin, end);
      const bool end_inside = grid.voxel_of(end).has_value();
      for (std::size_t k = 0; k < cells.size(); ++k) {
        const std::size_t li = grid.linear(cells[k]);
        if (end_inside && k + 1 == cells.size()) {
          marks[li] = kOccupied;
        } else if (marks[li] == kUntouched) {
          marks[li] = kFree;
        }
      }
    }
  }
  for (std::size_t i = 0; i < marks.size(); ++i) {
    if (marks[i] == kOccupied) {
      grid.add(i, grid.params().hit);
    } else if (marks[i] == kFree) {
      grid.add(i, grid.params().miss);
    }
  }
}

/// Keeps the floor(keep_fraction * N) pixels with the lowest uncertainty; ties keep input order.
inline std::vector<std::uint8_t> confidence_mask(std::span<const double> uncertainty, double keep_fraction) {
  require(keep_fraction > 0.0 && keep_fraction <= 1.0, "confidence_mask: keep fraction must be in (0, 1]");
  const std::size_t n = uncertainty.size();
  const auto keep = static_cast<std::size_t>(std::floor(keep_fraction * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return uncertainty[i] < uncertainty[j]; });
  std::vector<std::uint8_t> mask(n, 0);
  for (std::size_t k = 0; k < std::min(keep, n); ++k) mask[order[k]] = 1;
  return mask;
}

inline std::vector<std::uint8_t> confidence_mask(std::span<const DepthDistribution> dists, double keep_fraction) {
  std::vector<double> h;
  h.reserve(dists.size());
  for (const auto& d : dists) h.push_back(entropy(d));
  return confidence_mask(h, keep_fraction);
}

struct MapAccuracy {
  double percent = 0.0;
  std::size_t observed = 0;
  std::size_t correct = 0;
  std::size_t occupied = 0;
};

/// Share of observed cells (log-odds != prior) whose sign-thresholded state matches the reference.
inline MapAccuracy map_accuracy(const VoxelGrid& grid, const VoxelGrid& truth) {
  require(grid.same_layout(truth), "map_accuracy: grid layouts differ");
  MapAccuracy acc;
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    const CellState s = grid.state(i);
    if (s == CellState::unknown) continue;
    ++acc.observed;
    if (s == CellState::occupied) ++acc.occupied;
    const CellState t = truth.state(i) == CellState::occupied ? CellState::occupied : CellState::free;
    if (s == t) ++acc.correct;
  }
  require(acc.observed > 0, "map_accuracy: no observed cells, accuracy undefined");
  acc.percent = 100.0 * static_cast<double>(acc.correct) / static_cast<double>(acc.observed);
  return acc;
}

/// Memory proxy: a fixed header plus a per-cell cost for occupied and frontier
/// cells (free cells touching an unknown neighbour). Directional only; no
/// octree compression is modeled.
struct MemoryModel {
  std::size_t fixed_bytes = 64;
  std::size_t cell_bytes = 16;
};

inline std::size_t frontier_count(const VoxelGrid& grid) {
  const VoxelIndex dims = grid.dims();
  std::size_t n = 0;
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    if (grid.state(i) != CellState::free) continue;
    const VoxelIndex v = grid.unlinear(i);
    bool frontier = false;
    for (int a = 0; a < 3 && !frontier; ++a) {
      for (int s : {-1, 1}) {
        VoxelIndex w = v;
        w[a] += s;
        if (w[a] < 0 || w[a] >= dims[a]) continue;
        if (grid.state(w) == CellState::unknown) {
          frontier = true;
          break;
        }
      }
    }
    n += frontier ? 1 : 0;
  }
  return n;
}

inline std::size_t memory_estimate(const VoxelGrid& grid, const MemoryModel& model = {}) {
  return model.fixed_bytes + (grid.count(CellState::occupied) + frontier_count(grid)) * model.cell_bytes;
}

}  // namespace ddepth
