#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "igae/rng.hpp"

namespace igae {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    const double n = norm();
    return {x / n, y / n, z / n};
  }
};

// Row-major 3x3; columns are the camera axes [right, down, forward]
// expressed in world coordinates (camera-to-world rotation).
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  Vec3 col(int j) const { return {m[j], m[3 + j], m[6 + j]}; }
  Vec3 apply(const Vec3& v) const {
    return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
            m[3] * v.x + m[4] * v.y + m[5] * v.z,
            m[6] * v.x + m[7] * v.y + m[8] * v.z};
  }
  static Mat3 from_columns(const Vec3& c0, const Vec3& c1, const Vec3& c2) {
    Mat3 r;
    r.m = {c0.x, c1.x, c2.x, c0.y, c1.y, c2.y, c0.z, c1.z, c2.z};
    return r;
  }
  double det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) -
           m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
  }
};

struct CameraPose {
  Mat3 rotation;       // camera-to-world
  Vec3 translation;    // camera position, world units
  double fov_y = 0.9;  // radians, vertical
  int height = 64;
  int width = 64;

  Vec3 forward() const { return rotation.col(2); }

  bool finite() const {
    for (double v : rotation.m)
      if (!std::isfinite(v)) return false;
    return std::isfinite(translation.x) && std::isfinite(translation.y) &&
           std::isfinite(translation.z) && std::isfinite(fov_y);
  }

  // RtR = I and det = +1, both within tol.
  bool orthonormal(double tol = 1e-6) const {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double d = rotation.col(i).dot(rotation.col(j));
        if (std::abs(d - (i == j ? 1.0 : 0.0)) > tol) return false;
      }
    return std::abs(rotation.det() - 1.0) <= tol;
  }
};

// Camera at `position` looking at `target`, world up = +z.
inline CameraPose look_at_pose(const Vec3& position, const Vec3& target,
                               double fov_y, int height, int width) {
  const Vec3 f = (target - position).normalized();
  const Vec3 world_up{0, 0, 1};
  Vec3 u = world_up - f * world_up.dot(f);
  const double un = u.norm();
  if (un < 1e-9)
    throw std::invalid_argument("look_at_pose: view direction parallel to up");
  u = u * (1.0 / un);
  const Vec3 down = -u;
  const Vec3 right = down.cross(f);
  CameraPose p;
  p.rotation = Mat3::from_columns(right, down, f);
  p.translation = position;
  p.fov_y = fov_y;
  p.height = height;
  p.width = width;
  return p;
}

struct RaySet {
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;  // unit vectors
  double near = 0, far = 0;
  std::vector<std::array<int, 2>> pixels;  // (row, col)

  int count() const { return static_cast<int>(origins.size()); }
};

struct DepthSamples {
  int rays = 0, per_ray = 0;
  std::vector<double> t;       // [rays, per_ray], ascending per ray
  std::vector<double> deltas;  // delta_i = t_{i+1} - t_i, last = far - t_S
};

// One ray per pixel center of an h x w grid, pinhole model with square
// pixels and the principal point at the image center. The pose's own
// extent is ignored: latent images reuse the pose at a smaller grid.
inline RaySet generate_rays(const CameraPose& pose, int h, int w, double near,
                            double far) {
  if (!pose.finite())
    throw std::invalid_argument("generate_rays: non-finite pose");
  if (h < 1 || w < 1)
    throw std::invalid_argument("generate_rays: extent must be >= 1");
  if (!(near < far))
    throw std::invalid_argument("generate_rays: near must be < far");
  RaySet rays;
  rays.near = near;
  rays.far = far;
  rays.origins.reserve(static_cast<size_t>(h) * w);
  rays.directions.reserve(static_cast<size_t>(h) * w);
  rays.pixels.reserve(static_cast<size_t>(h) * w);
  const double pix = 2.0 * std::tan(pose.fov_y / 2.0) / h;
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      const Vec3 dir_cam{(j + 0.5 - w / 2.0) * pix, (i + 0.5 - h / 2.0) * pix,
                         1.0};
      rays.origins.push_back(pose.translation);
      rays.directions.push_back(pose.rotation.apply(dir_cam).normalized());
      rays.pixels.push_back({i, j});
    }
  return rays;
}

// S equal-width bins per ray; midpoints when jitter is off, one uniform
// draw per bin otherwise. Draws stay strictly inside [near, far].
inline DepthSamples sample_stratified(const RaySet& rays, int S, Rng& rng,
                                      bool jitter) {
  if (S < 2)
    throw std::invalid_argument("sample_stratified: S must be >= 2, got " +
                                std::to_string(S));
  DepthSamples ds;
  ds.rays = rays.count();
  ds.per_ray = S;
  ds.t.resize(static_cast<size_t>(ds.rays) * S);
  ds.deltas.resize(ds.t.size());
  const double bw = (rays.far - rays.near) / S;
  for (int i = 0; i < ds.rays; ++i) {
    double* trow = ds.t.data() + static_cast<size_t>(i) * S;
    for (int s = 0; s < S; ++s) {
      double u = 0.5;
      if (jitter) u = 1e-6 + rng.uniform() * (1.0 - 2e-6);
      trow[s] = rays.near + (s + u) * bw;
    }
    double* drow = ds.deltas.data() + static_cast<size_t>(i) * S;
    for (int s = 0; s + 1 < S; ++s) drow[s] = trow[s + 1] - trow[s];
    drow[S - 1] = rays.far - trow[S - 1];
  }
  return ds;
}

// Cameras on a sphere looking at the origin; azimuth uniform in [0, 2pi),
// elevation uniform in [-30 deg, +85 deg].
inline std::vector<CameraPose> sample_poses_on_sphere(int count, double radius,
                                                      Rng& rng,
                                                      double fov_y = 0.9,
                                                      int height = 64,
                                                      int width = 64) {
  if (count < 1 || !(radius > 0))
    throw std::invalid_argument("sample_poses_on_sphere: bad count/radius");
  constexpr double kPi = 3.14159265358979323846;
  const double lo = -30.0 * kPi / 180.0;
  const double hi = 85.0 * kPi / 180.0;
  std::vector<CameraPose> poses;
  poses.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double az = rng.uniform() * 2.0 * kPi;
    const double el = lo + rng.uniform() * (hi - lo);
    const Vec3 pos{radius * std::cos(el) * std::cos(az),
                   radius * std::cos(el) * std::sin(az),
                   radius * std::sin(el)};
    poses.push_back(look_at_pose(pos, Vec3{0, 0, 0}, fov_y, height, width));
  }
  return poses;
}

// Scene bounding sphere of radius r seen from distance d.
inline std::pair<double, double> near_far_for_sphere(double camera_distance,
                                                     double scene_radius) {
  const double margin = 0.05 * scene_radius + 1e-3;
  double near = camera_distance - scene_radius - margin;
  if (near < 1e-3) near = 1e-3;
  return {near, camera_distance + scene_radius + margin};
}

}  // namespace igae
