#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string_view>
#include <vector>

#include "ddepth/error.hpp"
#include "ddepth/geometry.hpp"
#include "ddepth/mapping.hpp"
#include "ddepth/rng.hpp"

namespace ddepth {

enum class SurfaceClass { opaque, transparent, edge };

inline std::string_view surface_name(SurfaceClass s) {
  switch (s) {
    case SurfaceClass::opaque: return "opaque";
    case SurfaceClass::transparent: return "transparent";
    case SurfaceClass::edge: return "edge";
  }
  return "?";
}

inline SurfaceClass parse_surface(std::string_view s) {
  if (s == "opaque") return SurfaceClass::opaque;
  if (s == "transparent") return SurfaceClass::transparent;
  if (s == "edge") return SurfaceClass::edge;
  throw ValidationError("unknown surface class '" + std::string(s) + "'");
}

struct DepthMode {
  double depth = 0.0;
  double prob = 0.0;

  friend bool operator==(const DepthMode&, const DepthMode&) = default;
};

/// Parameters of the per-pixel synthetic source.
struct PixelWorld {
  double min_depth = 1.0;
  double max_depth = 80.0;
  double cue_noise = 0.002;      ///< std-dev of the depth cues, normalized log-depth units
  double depth_noise = 0.02;     ///< log-normal std-dev of ground truth around its mode
  int nuisance_dims = 2;
  double nuisance_scale = 0.05;
  double min_mode_ratio = 2.0;
  double max_mode_ratio = 8.0;
  double near_prob = 0.5;        ///< probability of the nearer mode at ambiguous pixels
  double margin = 0.03;          ///< keeps modes away from the range ends, normalized units

  void validate() const {
    require(min_depth > 0.0 && max_depth > min_depth, "pixel world: need 0 < min depth < max depth");
    require(cue_noise >= 0.0 && depth_noise >= 0.0 && nuisance_scale >= 0.0, "pixel world: noise must be >= 0");
    require(nuisance_dims >= 0, "pixel world: nuisance dims must be >= 0");
    require(min_mode_ratio > 1.0 && max_mode_ratio >= min_mode_ratio, "pixel world: bad mode ratio range");
    require(near_prob > 0.0 && near_prob < 1.0, "pixel world: near mode probability must be in (0, 1)");
    require(margin >= 0.0 && margin < 0.25, "pixel world: margin must be in [0, 0.25)");
    const double gap = std::log(min_mode_ratio) / std::log(max_depth / min_depth);
    require(gap < 1.0 - 2.0 * margin, "pixel world: depth range too narrow for the mode ratio");
  }

  double log_span() const { return std::log(max_depth / min_depth); }
  /// Normalized log-depth in [0, 1].
  double to_unit(double depth) const { return std::log(depth / min_depth) / log_span(); }
  double from_unit(double u) const { return min_depth * std::exp(u * log_span()); }
  /// Pulls a depth into [min_depth, max_depth).
  double clamp(double depth) const { return std::clamp(depth, min_depth, std::nextafter(max_depth, min_depth)); }
};

inline constexpr int kCueEncodingDim = 7;
inline constexpr int kSurfaceClassCount = 3;

inline int feature_dim(const PixelWorld& world) {
  return kSurfaceClassCount + 2 * kCueEncodingDim + world.nuisance_dims;
}

struct PixelSample {
  std::vector<double> feature;
  double gt_depth = 0.0;
  std::vector<DepthMode> gt_modes;  ///< near to far
  bool ambiguous = false;
  SurfaceClass surface = SurfaceClass::opaque;
};

namespace detail {

inline void encode_cue(double u, std::vector<double>& out) {
  const double pi = std::numbers::pi;
  out.push_back(2.0 * u - 1.0);
  out.push_back(std::sin(pi * u));
  out.push_back(std::cos(pi * u));
  out.push_back(std::sin(2.0 * pi * u));
  out.push_back(std::cos(2.0 * pi * u));
  out.push_back(std::sin(4.0 * pi * u));
  out.push_back(std::cos(4.0 * pi * u));
}

}  // namespace detail

/**
 * Feature layout: surface one-hot, encoded near-mode cue, encoded far-mode
 * cue, nuisance dims. A unimodal pixel repeats its single cue. The features
 * reveal the mode set but never which mode produced the ground truth.
 */
inline std::vector<double> encode_features(const PixelWorld& world, SurfaceClass surface,
                                           std::span<const DepthMode> modes, Rng& rng) {
  require(!modes.empty() && modes.size() <= 2, "encode_features: need one or two modes");
  std::vector<double> f;
  f.reserve(static_cast<std::size_t>(feature_dim(world)));
  for (int c = 0; c < kSurfaceClassCount; ++c) f.push_back(static_cast<int>(surface) == c ? 1.0 : 0.0);
  const double near = modes.front().depth;
  const double far = modes.back().depth;
  detail::encode_cue(world.to_unit(near) + rng.normal(0.0, world.cue_noise), f);
  detail::encode_cue(world.to_unit(far) + rng.normal(0.0, world.cue_noise), f);
  for (int i = 0; i < world.nuisance_dims; ++i) f.push_back(rng.uniform(-world.nuisance_scale, world.nuisance_scale));
  return f;
}

inline PixelSample sample_pixel(const PixelWorld& world, bool ambiguous, Rng& rng) {
  PixelSample s;
  s.ambiguous = ambiguous;
  const double m = world.margin;
  if (!ambiguous) {
    s.surface = SurfaceClass::opaque;
    s.gt_modes = {{world.from_unit(rng.uniform(m, 1.0 - m)), 1.0}};
  } else {
    s.surface = rng.bernoulli(0.5) ? SurfaceClass::transparent : SurfaceClass::edge;
    const double gap_min = std::log(world.min_mode_ratio) / world.log_span();
    const double gap_max = std::min(std::log(world.max_mode_ratio) / world.log_span(), 1.0 - 2.0 * m);
    const double gap = rng.uniform(gap_min, gap_max);
    const double u_near = rng.uniform(m, 1.0 - m - gap);
    s.gt_modes = {{world.from_unit(u_near), world.near_prob}, {world.from_unit(u_near + gap), 1.0 - world.near_prob}};
  }
  const double mode = s.gt_modes.size() == 1 || rng.bernoulli(world.near_prob) ? s.gt_modes.front().depth
                                                                                 : s.gt_modes.back().depth;
  s.gt_depth = world.clamp(mode * std::exp(rng.normal(0.0, world.depth_noise)));
  s.feature = encode_features(world, s.surface, s.gt_modes, rng);
  return s;
}

/// Deterministic given seed.
inline std::vector<PixelSample> generate_pixels(const PixelWorld& world, std::size_t count, double ambiguous_fraction,
                                                std::uint64_t seed) {
  world.validate();
  require(count >= 1, "generate_pixels: count must be >= 1");
  require(ambiguous_fraction >= 0.0 && ambiguous_fraction <= 1.0, "generate_pixels: fraction must be in [0, 1]");
  Rng rng(seed);
  std::vector<PixelSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    // fraction 1 must always draw ambiguous; uniform() < 1 holds for every draw
    const bool ambiguous = rng.uniform() < ambiguous_fraction;
    out.push_back(sample_pixel(world, ambiguous, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenes

struct SceneBox {
  Aabb box;
  SurfaceClass surface = SurfaceClass::opaque;
  friend bool operator==(const SceneBox&, const SceneBox&) = default;
};

/// Infinite axis-aligned plane {p : p[axis] = offset}, clipped to the world bounds.
struct ScenePlane {
  int axis = 1;
  double offset = 0.0;
  SurfaceClass surface = SurfaceClass::opaque;
  friend bool operator==(const ScenePlane&, const ScenePlane&) = default;
};

struct SceneSpec {
  Aabb world{{-10, -10, -10}, {10, 10, 10}};
  Intrinsics camera{64, 48, 48.0, 48.0, 32.0, 24.0};
  std::vector<SceneBox> boxes;
  std::vector<ScenePlane> planes;

  void validate() const {
    require(world.valid(), "scene: empty world bounds");
    camera.validate();
    for (const auto& b : boxes) {
      require(b.box.valid(), "scene: degenerate box");
      require(world.contains(b.box.min) && world.contains(b.box.max), "scene: box outside world bounds");
    }
    for (const auto& p : planes) {
      require(p.axis >= 0 && p.axis <= 2, "scene: plane axis must be 0, 1 or 2");
      require(p.offset >= world.min[p.axis] && p.offset <= world.max[p.axis], "scene: plane outside world bounds");
    }
  }

  friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

inline constexpr double kNoReturn = std::numeric_limits<double>::infinity();

struct RenderedView {
  int height = 0;
  int width = 0;
  std::vector<double> depth;      ///< ground-truth z-depth, kNoReturn where nothing is hit
  std::vector<double> alt_depth;  ///< second plausible depth at ambiguous pixels, else kNoReturn
  std::vector<SurfaceClass> surface;

  DepthImage image() const { return {height, width, depth}; }
};

struct SurfaceHit {
  double t_enter = 0.0;
  double t_exit = 0.0;
  SurfaceClass surface = SurfaceClass::opaque;
};

/// All surfaces crossed by origin + t*dir for t > 0, nearest first.
inline std::vector<SurfaceHit> cast_ray(const SceneSpec& spec, Vec3 origin, Vec3 dir) {
  std::vector<SurfaceHit> hits;
  for (const auto& b : spec.boxes) {
    double t0 = 0.0;
    double t1 = 0.0;
    if (ray_box(origin, dir, b.box, t0, t1) && t0 > 0.0) hits.push_back({t0, t1, b.surface});
  }
  for (const auto& p : spec.planes) {
    if (dir[p.axis] == 0.0) continue;
    const double t = (p.offset - origin[p.axis]) / dir[p.axis];
    if (!(t > 0.0)) continue;
    Vec3 hit = origin + t * dir;
    hit[p.axis] = p.offset;
    if (spec.world.contains(hit)) hits.push_back({t, t, p.surface});
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const SurfaceHit& a, const SurfaceHit& b) { return a.t_enter < b.t_enter; });
  return hits;
}

/**
 * Ray-cast z-depth image. Transparent surfaces report the first
 * non-transparent surface behind them as ground truth and themselves as the
 * alternative; edge-class surfaces report themselves and keep the surface
 * behind as the alternative.
 */
inline RenderedView render_depth(const SceneSpec& spec, const CameraPose& pose) {
  spec.validate();
  pose.validate();
  require(spec.world.contains(pose.translation), "render_depth: camera outside world bounds");
  const Intrinsics& cam = spec.camera;
  RenderedView view;
  view.height = cam.height;
  view.width = cam.width;
  const std::size_t n = static_cast<std::size_t>(cam.height) * cam.width;
  view.depth.assign(n, kNoReturn);
  view.alt_depth.assign(n, kNoReturn);
  view.surface.assign(n, SurfaceClass::opaque);
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * cam.width + c;
      // unit-z camera ray: the world-space parameter t equals z-depth
      const auto hits = cast_ray(spec, pose.translation, pose.direction_to_world(cam.ray(c, r)));
      if (hits.empty()) continue;
      const SurfaceHit& first = hits.front();
      auto behind = [&](double t_after, bool skip_transparent) -> double {
        for (const auto& h : hits) {
          if (h.t_enter <= t_after) continue;
          if (skip_transparent && h.surface == SurfaceClass::transparent) continue;
          return h.t_enter;
        }
        return kNoReturn;
      };
      switch (first.surface) {
        case SurfaceClass::opaque:
          view.depth[i] = first.t_enter;
          break;
        case SurfaceClass::transparent:
          view.depth[i] = behind(first.t_exit, true);
          view.alt_depth[i] = first.t_enter;
          view.surface[i] = SurfaceClass::transparent;
          break;
        case SurfaceClass::edge:
          view.depth[i] = first.t_enter;
          view.alt_depth[i] = behind(first.t_exit, false);
          view.surface[i] = std::isfinite(view.alt_depth[i]) ? SurfaceClass::edge : SurfaceClass::opaque;
          break;
      }
    }
  }
  return view;
}

/// Per-pixel samples for a rendered view; pixels without a return get an empty feature.
inline std::vector<PixelSample> view_pixel_samples(const PixelWorld& world, const RenderedView& view, Rng& rng) {
  std::vector<PixelSample> out(view.depth.size());
  for (std::size_t i = 0; i < view.depth.size(); ++i) {
    PixelSample& s = out[i];
    if (!std::isfinite(view.depth[i])) continue;
    s.gt_depth = world.clamp(view.depth[i]);
    s.surface = view.surface[i];
    const double alt = view.alt_depth[i];
    if (s.surface != SurfaceClass::opaque && std::isfinite(alt)) {
      s.ambiguous = true;
      const double d1 = world.clamp(std::min(s.gt_depth, alt));
      const double d2 = world.clamp(std::max(s.gt_depth, alt));
      s.gt_modes = {{d1, 0.5}, {d2, 0.5}};
    } else {
      s.surface = SurfaceClass::opaque;
      s.gt_modes = {{s.gt_depth, 1.0}};
    }
    s.feature = encode_features(world, s.surface, s.gt_modes, rng);
  }
  return out;
}

/// Occupancy labels: cells overlapping a box interior or containing a plane
/// are occupied (transparent geometry included), everything else free.
inline VoxelGrid ground_truth_grid(const SceneSpec& spec, double resolution) {
  spec.validate();
  VoxelGrid grid(resolution, spec.world);
  const double occ = grid.params().clamp_max;
  const double fre = grid.params().clamp_min;
  for (std::size_t i = 0; i < grid.cell_count(); ++i) grid.set(i, fre);
  const VoxelIndex dims = grid.dims();
  const Aabb& w = spec.world;
  for (const auto& b : spec.boxes) {
    VoxelIndex lo;
    VoxelIndex hi;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::max(0, static_cast<int>(std::floor((b.box.min[a] - w.min[a]) / resolution)));
      hi[a] = std::min(dims[a] - 1, static_cast<int>(std::ceil((b.box.max[a] - w.min[a]) / resolution)) - 1);
    }
    for (int z = lo.z; z <= hi.z; ++z)
      for (int y = lo.y; y <= hi.y; ++y)
        for (int x = lo.x; x <= hi.x; ++x) grid.set(grid.linear({x, y, z}), occ);
  }
  for (const auto& p : spec.planes) {
    const int slab = std::clamp(static_cast<int>(std::floor((p.offset - w.min[p.axis]) / resolution)), 0,
                                dims[p.axis] - 1);
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      if (grid.unlinear(i)[p.axis] == slab) grid.set(i, occ);
    }
  }
  return grid;
}

}  // namespace ddepth
