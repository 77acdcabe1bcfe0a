#include <doctest.h>

#include <cmath>

#include "igae/geometry.hpp"

using namespace igae;

TEST_SUITE_BEGIN("geometry");

TEST_CASE("principal ray of odd extent equals camera forward") {
  auto pose = look_at_pose({3, 1, 2}, {0, 0, 0}, 0.8, 9, 9);
  auto rays = generate_rays(pose, 9, 9, 0.5, 5.0);
  const Vec3 center = rays.directions[4 * 9 + 4];
  const Vec3 f = pose.forward();
  CHECK(center.x == doctest::Approx(f.x).epsilon(1e-9));
  CHECK(center.y == doctest::Approx(f.y).epsilon(1e-9));
  CHECK(center.z == doctest::Approx(f.z).epsilon(1e-9));
}

TEST_CASE("all ray directions unit norm, one per pixel") {
  auto pose = look_at_pose({0, -4, 1}, {0, 0, 0}, 0.9, 6, 8);
  auto rays = generate_rays(pose, 6, 8, 0.5, 8.0);
  CHECK(rays.count() == 48);
  for (const auto& d : rays.directions)
    CHECK(std::abs(d.norm() - 1.0) < 1e-6);
}

TEST_CASE("corner pixel vs independent pinhole computation") {
  const Vec3 eye{2, -3, 1.5};
  const double fov = 0.85;
  const int h = 12, w = 16;
  auto pose = look_at_pose(eye, {0, 0, 0}, fov, h, w);
  auto rays = generate_rays(pose, h, w, 0.5, 8.0);

  // independent look-at basis (z-up, y-down camera)
  const Vec3 f = (Vec3{0, 0, 0} - eye).normalized();
  Vec3 up{0, 0, 1};
  up = (up - f * up.dot(f)).normalized();
  const Vec3 down = -up;
  const Vec3 right = down.cross(f);
  const double pix = 2.0 * std::tan(fov / 2.0) / h;
  const double cx = (0 + 0.5 - w / 2.0) * pix;   // corner pixel (0,0)
  const double cy = (0 + 0.5 - h / 2.0) * pix;
  const Vec3 want = (right * cx + down * cy + f).normalized();

  const Vec3& got = rays.directions[0];
  CHECK(got.x == doctest::Approx(want.x).epsilon(1e-6));
  CHECK(got.y == doctest::Approx(want.y).epsilon(1e-6));
  CHECK(got.z == doctest::Approx(want.z).epsilon(1e-6));
}

TEST_CASE("generate_rays is deterministic and validates input") {
  auto pose = look_at_pose({1, 1, 1}, {0, 0, 0}, 0.7, 4, 4);
  auto a = generate_rays(pose, 4, 4, 0.5, 3.0);
  auto b = generate_rays(pose, 4, 4, 0.5, 3.0);
  for (int i = 0; i < a.count(); ++i) {
    CHECK(a.directions[i].x == b.directions[i].x);
    CHECK(a.directions[i].y == b.directions[i].y);
    CHECK(a.directions[i].z == b.directions[i].z);
  }
  CameraPose bad = pose;
  bad.translation.x = std::nan("");
  CHECK_THROWS_AS(generate_rays(bad, 4, 4, 0.5, 3.0), std::invalid_argument);
}

TEST_CASE("latent grid issues exactly H*W/l^2 rays") {
  auto pose = look_at_pose({0, -3, 0.5}, {0, 0, 0}, 0.9, 64, 64);
  const int l = 4;
  auto rgb = generate_rays(pose, 64, 64, 0.5, 6.0);
  auto lat = generate_rays(pose, 64 / l, 64 / l, 0.5, 6.0);
  CHECK(rgb.count() == 4096);
  CHECK(lat.count() == 256);
  CHECK(rgb.count() == lat.count() * l * l);
}

TEST_CASE("stratified midpoints") {
  auto pose = look_at_pose({0, -2, 0}, {0, 0, 0}, 0.8, 2, 2);
  auto rays = generate_rays(pose, 1, 1, 0.0, 1.0);
  Rng rng(0);
  auto ds = sample_stratified(rays, 4, rng, false);
  CHECK(ds.t[0] == doctest::Approx(0.125));
  CHECK(ds.t[1] == doctest::Approx(0.375));
  CHECK(ds.t[2] == doctest::Approx(0.625));
  CHECK(ds.t[3] == doctest::Approx(0.875));
  CHECK(ds.deltas[0] == doctest::Approx(0.25));
  CHECK(ds.deltas[3] == doctest::Approx(0.125));
  CHECK_THROWS_AS(sample_stratified(rays, 1, rng, false),
                  std::invalid_argument);
}

TEST_CASE("jittered samples stay in their bins") {
  auto pose = look_at_pose({0, -2, 0}, {0, 0, 0}, 0.8, 1, 1);
  auto rays = generate_rays(pose, 1, 1, 1.0, 3.0);
  Rng rng(9);
  const int S = 8;
  const double bw = 2.0 / S;
  for (int rep = 0; rep < 1000; ++rep) {
    auto ds = sample_stratified(rays, S, rng, true);
    for (int s = 0; s < S; ++s) {
      CHECK(ds.t[s] >= 1.0 + s * bw);
      CHECK(ds.t[s] <= 1.0 + (s + 1) * bw);
      CHECK(ds.t[s] > rays.near);
      CHECK(ds.t[s] < rays.far);
    }
  }
}

TEST_CASE("jittered per-bin mean matches midpoint within 3 sigma") {
  auto pose = look_at_pose({0, -2, 0}, {0, 0, 0}, 0.8, 1, 1);
  auto rays = generate_rays(pose, 1, 1, 0.0, 1.0);
  Rng rng(123);
  const int S = 4, N = 10000;
  std::vector<double> acc(S, 0.0);
  for (int rep = 0; rep < N; ++rep) {
    auto ds = sample_stratified(rays, S, rng, true);
    for (int s = 0; s < S; ++s) acc[s] += ds.t[s];
  }
  const double bw = 1.0 / S;
  const double sigma_mean = bw / std::sqrt(12.0 * N);
  for (int s = 0; s < S; ++s) {
    const double mean_s = acc[s] / N;
    const double mid = (s + 0.5) * bw;
    CHECK(std::abs(mean_s - mid) < 3.0 * sigma_mean);
  }
}

TEST_CASE("poses on sphere: radius, look-at, elevation bounds") {
  Rng rng(77);
  auto poses = sample_poses_on_sphere(200, 2.5, rng);
  for (const auto& p : poses) {
    CHECK(std::abs(p.translation.norm() - 2.5) < 1e-6);
    // forward axis points at origin: R [0,0,1] ~ -t/|t|
    const Vec3 f = p.forward();
    const Vec3 want = -p.translation.normalized();
    CHECK(f.x == doctest::Approx(want.x).epsilon(1e-6));
    CHECK(f.y == doctest::Approx(want.y).epsilon(1e-6));
    CHECK(f.z == doctest::Approx(want.z).epsilon(1e-6));
    CHECK(p.orthonormal());
    const double el = std::asin(p.translation.z / 2.5);
    CHECK(el >= -30.0 * M_PI / 180.0 - 1e-9);
    CHECK(el <= 85.0 * M_PI / 180.0 + 1e-9);
  }
}

TEST_CASE("azimuth histogram uniform under chi-square") {
  Rng rng(31);
  auto poses = sample_poses_on_sphere(10000, 1.0, rng);
  const int bins = 16;
  std::vector<int> hist(bins, 0);
  for (const auto& p : poses) {
    double az = std::atan2(p.translation.y, p.translation.x);
    if (az < 0) az += 2.0 * M_PI;
    int b = std::min(bins - 1, static_cast<int>(az / (2.0 * M_PI) * bins));
    ++hist[b];
  }
  const double expected = 10000.0 / bins;
  double chi2 = 0;
  for (int b = 0; b < bins; ++b) {
    const double d = hist[b] - expected;
    chi2 += d * d / expected;
  }
  // chi-square critical value, df=15, p=0.01
  CHECK(chi2 < 30.578);
}

TEST_SUITE_END();
