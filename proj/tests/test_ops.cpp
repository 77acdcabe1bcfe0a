#include <doctest.h>

#include <cmath>

#include "igae/ops.hpp"

using namespace igae;

TEST_SUITE_BEGIN("ops");

TEST_CASE("conv2d identity kernel") {
  Rng rng(1);
  auto x = Tensor::uniform({1, 1, 5, 5}, rng, -1.f, 1.f);
  std::vector<float> kd(9, 0.f);
  kd[4] = 1.f;  // center tap
  auto k = Tensor::from_data({1, 1, 3, 3}, kd);
  auto y = conv2d(x, k, 1, 1);
  CHECK(y.shape() == x.shape());
  for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d all-ones kernel on constant input") {
  auto x = Tensor::filled({1, 1, 5, 5}, 1.f);
  auto k = Tensor::filled({1, 1, 3, 3}, 1.f);
  auto y = conv2d(x, k, 1, 1);
  // interior pixel sees all nine taps
  CHECK(y.data()[2 * 5 + 2] == 9.f);
  // corner pixel sees only the 2x2 overlap
  CHECK(y.data()[0] == 4.f);
}

TEST_CASE("conv2d vs six-nested-loop oracle") {
  Rng rng(2);
  auto x = Tensor::uniform({1, 2, 6, 6}, rng, -1.f, 1.f);
  auto k = Tensor::uniform({3, 2, 3, 3}, rng, -1.f, 1.f);
  for (int stride : {1, 2}) {
    auto y = conv2d(x, k, stride, 1);
    const int OH = (6 + 2 - 3) / stride + 1;
    const int OW = OH;
    CHECK(y.shape() == Shape{1, 3, OH, OW});
    for (int co = 0; co < 3; ++co)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double acc = 0;
          for (int ci = 0; ci < 2; ++ci)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = oy * stride + ky - 1;
                const int ix = ox * stride + kx - 1;
                if (iy < 0 || iy >= 6 || ix < 0 || ix >= 6) continue;
                acc += static_cast<double>(x.data()[(ci * 6 + iy) * 6 + ix]) *
                       k.data()[((co * 2 + ci) * 3 + ky) * 3 + kx];
              }
          CHECK(y.data()[(co * OH + oy) * OW + ox] ==
                doctest::Approx(acc).epsilon(1e-6));
        }
  }
}

TEST_CASE("conv2d kernel larger than padded input") {
  auto x = Tensor::zeros({1, 1, 1, 1});
  auto k = Tensor::zeros({1, 1, 3, 3});
  CHECK_THROWS_AS(conv2d(x, k, 1, 0), std::invalid_argument);
}

TEST_CASE("upsample replicates 2x2 blocks") {
  auto x = Tensor::from_data({1, 1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
  auto y = upsample_nearest2x(x);
  CHECK(y.shape() == Shape{1, 1, 4, 4});
  const std::vector<float> want{1, 1, 2, 2, 1, 1, 2, 2,
                                3, 3, 4, 4, 3, 3, 4, 4};
  CHECK(y.data() == want);

  auto c = Tensor::filled({1, 2, 3, 3}, 0.7f);
  auto cy = upsample_nearest2x(c);
  for (float v : cy.data()) CHECK(v == 0.7f);
}

TEST_CASE("upsample backward sums blocks") {
  auto x = Tensor::filled({1, 1, 2, 2}, 1.f, true);
  sum(upsample_nearest2x(x)).backward();
  for (float g : x.grad()) CHECK(g == 4.f);
}

TEST_CASE("grid_sample node hit and cell center") {
  Rng rng(3);
  auto plane = Tensor::uniform({2, 4, 4}, rng, -1.f, 1.f);
  // node (row 2, col 1) in align-corners coords
  const float u = -1.f + 2.f * 1 / 3.f;
  const float v = -1.f + 2.f * 2 / 3.f;
  auto uv = Tensor::from_data({1, 2}, {u, v});
  auto out = grid_sample_bilinear(plane, uv);
  CHECK(out.data()[0] == doctest::Approx(plane.data()[2 * 4 + 1]).epsilon(1e-5));
  CHECK(out.data()[1] ==
        doctest::Approx(plane.data()[16 + 2 * 4 + 1]).epsilon(1e-5));

  // center of the cell with corners (0,0),(0,1),(1,0),(1,1)
  const float cu = -1.f + 2.f * 0.5f / 3.f;
  auto uv2 = Tensor::from_data({1, 2}, {cu, cu});
  auto out2 = grid_sample_bilinear(plane, uv2);
  const float m = (plane.data()[0] + plane.data()[1] + plane.data()[4] +
                   plane.data()[5]) / 4.f;
  CHECK(out2.data()[0] == doctest::Approx(m).epsilon(1e-5));
}

TEST_CASE("grid_sample vs scalar bilinear oracle") {
  Rng rng(4);
  auto plane = Tensor::uniform({3, 5, 5}, rng, -2.f, 2.f);
  auto uv = Tensor::uniform({10, 2}, rng, -1.f, 1.f);
  auto out = grid_sample_bilinear(plane, uv);
  for (int i = 0; i < 10; ++i) {
    const double fx = (uv.data()[2 * i] + 1.0) * 2.0;
    const double fy = (uv.data()[2 * i + 1] + 1.0) * 2.0;
    const int x0 = std::min(static_cast<int>(fx), 3);
    const int y0 = std::min(static_cast<int>(fy), 3);
    const double ax = fx - x0, ay = fy - y0;
    for (int f = 0; f < 3; ++f) {
      auto at = [&](int y, int x) {
        return static_cast<double>(plane.data()[(f * 5 + y) * 5 + x]);
      };
      const double want = (1 - ay) * ((1 - ax) * at(y0, x0) + ax * at(y0, x0 + 1)) +
                          ay * ((1 - ax) * at(y0 + 1, x0) + ax * at(y0 + 1, x0 + 1));
      CHECK(out.data()[i * 3 + f] == doctest::Approx(want).epsilon(1e-6));
    }
  }
}

TEST_CASE("grid_sample clamps out-of-range and rejects non-finite") {
  auto plane = Tensor::from_data({1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
  auto uv = Tensor::from_data({1, 2}, {-5.f, -5.f});
  CHECK(grid_sample_bilinear(plane, uv).data()[0] == 1.f);
  auto bad = Tensor::from_data({1, 2}, {std::nanf(""), 0.f});
  CHECK_THROWS_AS(grid_sample_bilinear(plane, bad), std::invalid_argument);
}

TEST_CASE("composite: zero density gives background") {
  auto sigma = Tensor::zeros({1, 4});
  auto ch = Tensor::filled({1, 4, 3}, 0.5f);
  auto deltas = Tensor::filled({1, 4}, 0.25f);
  auto bg = Tensor::from_data({3}, {1.f, 0.5f, 0.25f});
  auto out = composite_rays(sigma, ch, deltas, bg);
  CHECK(out.data()[0] == 1.f);
  CHECK(out.data()[1] == 0.5f);
  CHECK(out.data()[2] == 0.25f);
}

TEST_CASE("composite: opaque first sample saturates") {
  auto sigma = Tensor::from_data({1, 2}, {400.f, 1.f});
  auto ch = Tensor::from_data({1, 2, 1}, {0.8f, 0.1f});
  auto deltas = Tensor::from_data({1, 2}, {0.1f, 0.1f});
  auto bg = Tensor::from_data({1}, {1.f});
  auto out = composite_rays(sigma, ch, deltas, bg);
  CHECK(out.data()[0] == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("composite rejects negative sigma") {
  auto sigma = Tensor::from_data({1, 1}, {-0.1f});
  auto ch = Tensor::zeros({1, 1, 1});
  auto deltas = Tensor::filled({1, 1}, 0.5f);
  CHECK_THROWS_AS(
      composite_rays(sigma, ch, deltas, Tensor::zeros({1})),
      std::invalid_argument);
}

TEST_CASE("tv examples") {
  auto c = Tensor::filled({3, 4, 4}, 0.37f);
  CHECK(tv_image(c, 2, 2).item() == 0.f);
  CHECK(tv_image(c, 2, 1).item() == 0.f);

  auto img = Tensor::from_data({1, 2, 2}, {0.f, 1.f, 0.f, 1.f});
  CHECK(tv_image(img, 2, 2).item() == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(tv_image(img, 2, 1).item() == doctest::Approx(0.5).epsilon(1e-6));

  CHECK_THROWS_AS(tv_image(img, 1, 1), std::invalid_argument);
}

TEST_CASE("tv direct-summation oracle on random image") {
  Rng rng(5);
  auto img = Tensor::uniform({2, 3, 4}, rng, -1.f, 1.f);
  auto at = [&](int c, int y, int x) {
    return static_cast<double>(img.data()[(c * 3 + y) * 4 + x]);
  };
  double acc22 = 0, acc21 = 0;
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 4; ++x) {
      if (y > 0) {
        double ss = 0;
        for (int c = 0; c < 2; ++c) {
          double d = at(c, y, x) - at(c, y - 1, x);
          ss += d * d;
        }
        acc22 += ss;
        acc21 += std::sqrt(ss);
      }
      if (x > 0) {
        double ss = 0;
        for (int c = 0; c < 2; ++c) {
          double d = at(c, y, x) - at(c, y, x - 1);
          ss += d * d;
        }
        acc22 += ss;
        acc21 += std::sqrt(ss);
      }
    }
  CHECK(tv_image(img, 2, 2).item() ==
        doctest::Approx(acc22 / 12.0).epsilon(1e-5));
  CHECK(tv_image(img, 2, 1).item() ==
        doctest::Approx(acc21 / 12.0).epsilon(1e-5));
}

TEST_SUITE_END();
