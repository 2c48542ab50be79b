#pragma once

#include <array>
#include <cmath>

#include "ddepth/error.hpp"

namespace ddepth {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

/// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(r * 3 + c)]; }
  double& operator()(int r, int c) { return m[static_cast<std::size_t>(r * 3 + c)]; }

  Vec3 operator*(Vec3 v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z, m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }

  static Mat3 rotation_y(double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {{c, 0, s, 0, 1, 0, -s, 0, c}};
  }
};

/// Axis-aligned box.
struct Aabb {
  Vec3 min;
  Vec3 max;

  bool contains(Vec3 p) const {
    return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
  }
  double volume() const { return (max.x - min.x) * (max.y - min.y) * (max.z - min.z); }
  bool valid() const { return min.x < max.x && min.y < max.y && min.z < max.z; }
  friend bool operator==(const Aabb&, const Aabb&) = default;
};

/// Slab test. Returns the entry/exit parameters of origin + t*dir, or false
/// when the ray misses. t_enter may be negative when origin is inside.
inline bool ray_box(Vec3 origin, Vec3 dir, const Aabb& box, double& t_enter, double& t_exit) {
  double lo = -INFINITY;
  double hi = INFINITY;
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < box.min[a] || origin[a] > box.max[a]) return false;
      continue;
    }
    double t0 = (box.min[a] - origin[a]) / dir[a];
    double t1 = (box.max[a] - origin[a]) / dir[a];
    if (t0 > t1) std::swap(t0, t1);
    lo = std::max(lo, t0);
    hi = std::min(hi, t1);
  }
  if (lo > hi) return false;
  t_enter = lo;
  t_exit = hi;
  return true;
}

/// Pinhole camera; x right, y down, z forward.
struct Intrinsics {
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  void validate() const {
    require(width > 0 && height > 0, "intrinsics: image size must be positive");
    require(fx > 0.0 && fy > 0.0, "intrinsics: focal length must be > 0");
  }

  /// Camera-frame direction through the pixel center, scaled so z = 1.
  /// Multiplying by a z-depth gives the camera-frame point.
  Vec3 ray(int col, int row) const { return {(col + 0.5 - cx) / fx, (row + 0.5 - cy) / fy, 1.0}; }

  friend bool operator==(const Intrinsics&, const Intrinsics&) = default;
};

/// Camera-to-world rigid transform.
struct CameraPose {
  Mat3 rotation;
  Vec3 translation;

  void validate() const {
    for (double v : rotation.m) require(std::isfinite(v), "pose: non-finite rotation");
    require(std::isfinite(translation.x) && std::isfinite(translation.y) && std::isfinite(translation.z),
            "pose: non-finite translation");
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double d = 0.0;
        for (int k = 0; k < 3; ++k) d += rotation(k, i) * rotation(k, j);
        require(std::abs(d - (i == j ? 1.0 : 0.0)) <= 1e-6, "pose: rotation is not orthonormal");
      }
    }
  }

  Vec3 to_world(Vec3 p) const { return rotation * p + translation; }
  Vec3 direction_to_world(Vec3 d) const { return rotation * d; }
};

}  // namespace ddepth
