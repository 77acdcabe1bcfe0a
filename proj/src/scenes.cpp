#include "igae/scenes.hpp"

#include <algorithm>
#include <cmath>

namespace igae {

namespace {

constexpr double kPi = 3.14159265358979323846;

// real roots of x^2 + px + q
int solve_quadratic(double p, double q, double out[2]) {
  const double d = p * p / 4.0 - q;
  if (d < 0) return 0;
  const double sd = std::sqrt(d);
  out[0] = -p / 2.0 - sd;
  out[1] = -p / 2.0 + sd;
  return d == 0 ? 1 : 2;
}

// real roots of x^3 + ax^2 + bx + c (Cardano, trigonometric branch)
int solve_cubic(double a, double b, double c, double out[3]) {
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double off = -a / 3.0;
  const double d = q * q / 4.0 + p * p * p / 27.0;
  if (d > 1e-18) {
    const double sd = std::sqrt(d);
    const double u = std::cbrt(-q / 2.0 + sd);
    const double v = std::cbrt(-q / 2.0 - sd);
    out[0] = u + v + off;
    return 1;
  }
  if (std::abs(p) < 1e-14) {
    out[0] = std::cbrt(-q) + off;
    return 1;
  }
  const double r = std::sqrt(-p * p * p / 27.0);
  const double phi = std::acos(std::clamp(-q / (2.0 * r), -1.0, 1.0));
  const double m = 2.0 * std::cbrt(r);
  for (int k = 0; k < 3; ++k)
    out[k] = m * std::cos((phi + 2.0 * kPi * k) / 3.0) + off;
  return 3;
}

// real roots of x^4 + ax^3 + bx^2 + cx + d (Ferrari via resolvent cubic)
int solve_quartic(double a, double b, double c, double d, double out[4]) {
  // depressed quartic y^4 + py^2 + qy + r, x = y - a/4
  const double a2 = a * a;
  const double p = b - 3.0 * a2 / 8.0;
  const double q = c - a * b / 2.0 + a2 * a / 8.0;
  const double r =
      d - a * c / 4.0 + a2 * b / 16.0 - 3.0 * a2 * a2 / 256.0;
  const double off = -a / 4.0;
  int n = 0;
  if (std::abs(q) < 1e-12) {
    // biquadratic
    double z[2];
    const int nz = solve_quadratic(p, r, z);
    for (int i = 0; i < nz; ++i)
      if (z[i] >= 0) {
        const double s = std::sqrt(z[i]);
        out[n++] = s + off;
        out[n++] = -s + off;
      }
    return n;
  }
  // resolvent cubic z^3 + 2p z^2 + (p^2-4r) z - q^2 = 0, pick a positive root
  double zr[3];
  const int nz = solve_cubic(2.0 * p, p * p - 4.0 * r, -q * q, zr);
  double z = -1;
  for (int i = 0; i < nz; ++i) z = std::max(z, zr[i]);
  if (z <= 1e-14) return 0;
  const double s = std::sqrt(z);
  // y^2 +- s y + (p + z)/2 -+ q/(2s) = 0
  double roots[2];
  const double half = (p + z) / 2.0;
  const double shift = q / (2.0 * s);
  int nq = solve_quadratic(s, half - shift, roots);
  for (int i = 0; i < nq; ++i) out[n++] = roots[i] + off;
  nq = solve_quadratic(-s, half + shift, roots);
  for (int i = 0; i < nq; ++i) out[n++] = roots[i] + off;
  return n;
}

std::optional<double> hit_sphere(const Primitive& pr, const Vec3& o,
                                 const Vec3& d, double t_min) {
  const Vec3 oc = o - pr.center;
  const double b = 2.0 * oc.dot(d);
  const double c = oc.dot(oc) - pr.size.x * pr.size.x;
  double roots[2];
  const int n = solve_quadratic(b, c, roots);  // d is unit: a = 1
  for (int i = 0; i < n; ++i)
    if (roots[i] > t_min) return roots[i];
  return std::nullopt;
}

std::optional<std::pair<double, Vec3>> hit_box(const Primitive& pr,
                                               const Vec3& o, const Vec3& d,
                                               double t_min) {
  const double omin[3] = {pr.center.x - pr.size.x, pr.center.y - pr.size.y,
                          pr.center.z - pr.size.z};
  const double omax[3] = {pr.center.x + pr.size.x, pr.center.y + pr.size.y,
                          pr.center.z + pr.size.z};
  const double ov[3] = {o.x, o.y, o.z};
  const double dv[3] = {d.x, d.y, d.z};
  double t0 = t_min, t1 = 1e30;
  int axis0 = -1;
  double sign0 = 0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(dv[a]) < 1e-12) {
      if (ov[a] < omin[a] || ov[a] > omax[a]) return std::nullopt;
      continue;
    }
    double ta = (omin[a] - ov[a]) / dv[a];
    double tb = (omax[a] - ov[a]) / dv[a];
    double sgn = -1;
    if (ta > tb) {
      std::swap(ta, tb);
      sgn = 1;
    }
    if (ta > t0) {
      t0 = ta;
      axis0 = a;
      sign0 = sgn;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (axis0 < 0) return std::nullopt;  // origin inside the box
  Vec3 n{0, 0, 0};
  if (axis0 == 0) n.x = sign0;
  if (axis0 == 1) n.y = sign0;
  if (axis0 == 2) n.z = sign0;
  return std::make_pair(t0, n);
}

double torus_implicit(const Primitive& pr, const Vec3& p) {
  const Vec3 q = p - pr.center;
  const double R = pr.size.x, r = pr.size.y;
  const double s = q.dot(q) + R * R - r * r;
  return s * s - 4.0 * R * R * (q.x * q.x + q.y * q.y);
}

std::optional<double> hit_torus(const Primitive& pr, const Vec3& o,
                                const Vec3& d, double t_min) {
  const Vec3 oc = o - pr.center;
  const double R = pr.size.x, r = pr.size.y;
  const double beta = 2.0 * oc.dot(d);
  const double gamma = oc.dot(oc) + R * R - r * r;
  const double dxy = d.x * d.x + d.y * d.y;
  const double oxy = oc.x * oc.x + oc.y * oc.y;
  const double odxy = oc.x * d.x + oc.y * d.y;

  const double a3 = 2.0 * beta;
  const double a2 = beta * beta + 2.0 * gamma - 4.0 * R * R * dxy;
  const double a1 = 2.0 * beta * gamma - 8.0 * R * R * odxy;
  const double a0 = gamma * gamma - 4.0 * R * R * oxy;

  double roots[4];
  const int n = solve_quartic(a3, a2, a1, a0, roots);
  double best = 1e30;
  for (int i = 0; i < n; ++i) {
    double t = roots[i];
    // Newton polish against the quartic in t
    for (int it = 0; it < 3; ++it) {
      const double f = ((t + a3) * t + a2) * t * t + a1 * t + a0;
      const double df = ((4.0 * t + 3.0 * a3) * t + 2.0 * a2) * t + a1;
      if (std::abs(df) < 1e-12) break;
      t -= f / df;
    }
    if (t > t_min && t < best &&
        std::abs(torus_implicit(pr, o + d * t)) < 1e-6 * (1.0 + R * R * R * R))
      best = t;
  }
  if (best == 1e30) return std::nullopt;
  return best;
}

Vec3 torus_normal(const Primitive& pr, const Vec3& p) {
  const Vec3 q = p - pr.center;
  const double R = pr.size.x, r = pr.size.y;
  const double s = q.dot(q) + R * R - r * r;
  Vec3 n = q * (4.0 * s) - Vec3{q.x, q.y, 0} * (8.0 * R * R);
  return n.normalized();
}

Vec3 hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = std::fmod(h, 1.0) * 6.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else { r = c; b = x; }
  const double m = v - c;
  return {r + m, g + m, b + m};
}

}  // namespace

ProceduralScene make_scene(uint64_t seed, int difficulty) {
  ProceduralScene scene;
  scene.seed = seed;
  scene.difficulty = difficulty;
  scene.radius = 1.0;
  Rng rng(Rng(seed).derive("scene").next_u64());

  if (difficulty <= 0) {
    Primitive p;
    p.kind = PrimitiveKind::sphere;
    p.center = {0, 0, 0};
    p.size = {0.55, 0, 0};
    p.albedo = hsv_to_rgb(rng.uniform(), 0.65, 0.85);
    scene.primitives.push_back(p);
    return scene;
  }

  const int count = difficulty == 1 ? 2 + static_cast<int>(rng.next_below(3))
                                    : 5 + static_cast<int>(rng.next_below(4));
  const double hue0 = rng.uniform();
  for (int i = 0; i < count; ++i) {
    Primitive p;
    const double kind_draw = rng.uniform();
    p.kind = kind_draw < 0.5 ? PrimitiveKind::sphere
             : kind_draw < 0.8 ? PrimitiveKind::box
                               : PrimitiveKind::torus;
    // keep the whole primitive inside the unit bounding sphere
    const double cr = rng.uniform(0.0, 0.5);
    const double az = rng.uniform(0.0, 2.0 * kPi);
    const double el = rng.uniform(-0.9, 0.9);
    p.center = {cr * std::cos(el) * std::cos(az),
                cr * std::cos(el) * std::sin(az), cr * std::sin(el)};
    const double max_ext = 0.9 * (scene.radius - cr);
    const double s = rng.uniform(0.12, std::min(0.4, max_ext));
    switch (p.kind) {
      case PrimitiveKind::sphere:
        p.size = {s, 0, 0};
        break;
      case PrimitiveKind::box: {
        const double sx = s * rng.uniform(0.55, 1.0);
        const double sy = s * rng.uniform(0.55, 1.0);
        const double sz = s * rng.uniform(0.55, 1.0);
        // half extents; the box diagonal must stay within max_ext
        const double diag = std::sqrt(sx * sx + sy * sy + sz * sz);
        const double fit = diag > max_ext ? max_ext / diag : 1.0;
        p.size = {sx * fit, sy * fit, sz * fit};
        break;
      }
      case PrimitiveKind::torus: {
        const double minor = s * rng.uniform(0.2, 0.35);
        const double major = std::min(s - minor, max_ext - minor);
        p.size = {std::max(major, minor * 1.5), minor, 0};
        break;
      }
    }
    // distinct albedos: evenly spaced hues with a small seeded offset
    p.albedo = hsv_to_rgb(hue0 + static_cast<double>(i) / count +
                              rng.uniform(0.0, 0.3 / count),
                          rng.uniform(0.55, 0.9), rng.uniform(0.6, 0.95));
    scene.primitives.push_back(p);
  }
  return scene;
}

std::optional<Hit> intersect_scene(const ProceduralScene& scene,
                                   const Vec3& origin, const Vec3& dir,
                                   double t_min) {
  Hit best;
  best.t = 1e30;
  for (const auto& pr : scene.primitives) {
    switch (pr.kind) {
      case PrimitiveKind::sphere: {
        auto t = hit_sphere(pr, origin, dir, t_min);
        if (t && *t < best.t) {
          best.t = *t;
          best.normal = (origin + dir * *t - pr.center).normalized();
          best.prim = &pr;
        }
        break;
      }
      case PrimitiveKind::box: {
        auto hit = hit_box(pr, origin, dir, t_min);
        if (hit && hit->first < best.t) {
          best.t = hit->first;
          best.normal = hit->second;
          best.prim = &pr;
        }
        break;
      }
      case PrimitiveKind::torus: {
        auto t = hit_torus(pr, origin, dir, t_min);
        if (t && *t < best.t) {
          best.t = *t;
          best.normal = torus_normal(pr, origin + dir * *t);
          best.prim = &pr;
        }
        break;
      }
    }
  }
  if (!best.prim) return std::nullopt;
  return best;
}

Vec3 shade_gt(const Vec3& albedo, const Vec3& normal) {
  const double lambert = std::max(0.0, normal.dot(kGtLightDir));
  const double level = kGtAmbient + (1.0 - kGtAmbient) * lambert;
  return albedo * level;
}

Image render_gt_view(const ProceduralScene& scene, const CameraPose& pose,
                     int h, int w) {
  Image img(3, h, w, 1.f);  // white background
  const RaySet rays = generate_rays(pose, h, w, 1e-4, 1e4);
  for (int i = 0; i < rays.count(); ++i) {
    auto hit = intersect_scene(scene, rays.origins[i], rays.directions[i]);
    if (!hit) continue;
    // make outward-facing under grazing numeric noise
    Vec3 n = hit->normal;
    if (n.dot(rays.directions[i]) > 0) n = -n;
    const Vec3 c = shade_gt(hit->prim->albedo, n);
    const auto [py, px] = rays.pixels[i];
    img.at(0, py, px) = static_cast<float>(std::clamp(c.x, 0.0, 1.0));
    img.at(1, py, px) = static_cast<float>(std::clamp(c.y, 0.0, 1.0));
    img.at(2, py, px) = static_cast<float>(std::clamp(c.z, 0.0, 1.0));
  }
  return img;
}

}  // namespace igae
