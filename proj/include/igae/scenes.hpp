#pragma once

#include <optional>
#include <vector>

#include "igae/geometry.hpp"
#include "igae/image.hpp"
#include "igae/rng.hpp"

namespace igae {

enum class PrimitiveKind { sphere, box, torus };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::sphere;
  Vec3 center;
  // sphere: size.x = radius
  // box:    size = half extents
  // torus:  size.x = major radius, size.y = minor radius, axis = +z
  Vec3 size{0.5, 0.5, 0.5};
  Vec3 albedo{0.5, 0.5, 0.5};
};

// Analytic scene inside a bounding sphere; the ground-truth renderer is
// exact, so every posed view set is 3D-consistent by construction.
struct ProceduralScene {
  std::vector<Primitive> primitives;
  double radius = 1.0;
  uint64_t seed = 0;
  int difficulty = 1;
};

// Shading constants for the ground-truth renderer (flat albedo, one fixed
// directional light, white background).
inline constexpr double kGtAmbient = 0.35;
inline const Vec3 kGtLightDir = Vec3{0.35, 0.25, 0.9}.normalized();

struct Hit {
  double t = 0;
  Vec3 normal;
  const Primitive* prim = nullptr;
};

// difficulty 0: a single centered sphere; 1: 2-4 primitives; 2+: 5-8.
ProceduralScene make_scene(uint64_t seed, int difficulty = 1);

std::optional<Hit> intersect_scene(const ProceduralScene& scene,
                                   const Vec3& origin, const Vec3& dir,
                                   double t_min = 1e-6);

Image render_gt_view(const ProceduralScene& scene, const CameraPose& pose,
                     int h, int w);

Vec3 shade_gt(const Vec3& albedo, const Vec3& normal);

}  // namespace igae
