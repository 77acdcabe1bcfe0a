#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "igae/dataset.hpp"

using namespace igae;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("igae_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("view set counts and split") {
  auto scene = make_scene(3, 0);
  auto vs = build_view_set(scene, 20, 16, 3);
  CHECK(vs.poses.size() == 20);
  CHECK(vs.images.size() == 20);
  const auto train = vs.train_indices();
  const auto held = vs.heldout_indices();
  CHECK(train.size() + held.size() == 20);
  CHECK(held.size() == 3);  // ceil(20/8)
  for (int i : held) CHECK(i % 8 == 0);
}

TEST_CASE("view sets are deterministic from seed") {
  auto scene = make_scene(4, 1);
  auto a = build_view_set(scene, 6, 12, 9);
  auto b = build_view_set(scene, 6, 12, 9);
  for (int i = 0; i < 6; ++i) {
    CHECK(a.poses[i].translation.x == b.poses[i].translation.x);
    CHECK(a.images[i].data == b.images[i].data);
  }
}

TEST_CASE("latent cache matches fresh encodes bit-exactly") {
  Rng rng(0);
  AutoencoderSpec spec;
  spec.downscale = 2;
  spec.channels = 4;
  spec.schedule = {8};
  auto ae = AutoencoderT<float>::make(spec, rng);
  auto scene = make_scene(1, 0);
  auto vs = build_view_set(scene, 10, 16, 1);
  auto cache = build_latent_cache(ae, vs);
  CHECK(cache.latents.size() == vs.train_indices().size());
  CHECK(cache.fingerprint == encoder_fingerprint(ae));
  CHECK(cache.h == 8);
  CHECK(cache.w == 8);
  CHECK(cache.c == 4);
  for (size_t e = 0; e < cache.latents.size(); ++e) {
    const int v = cache.pose_index[e];
    auto fresh = ae.encode(reshape(image_to_tensor(vs.images[v]),
                                   {1, 3, 16, 16}));
    CHECK(cache.latents[e] == fresh.data());
  }
}

TEST_CASE("latent cache round trip and binary layout") {
  TempDir tmp;
  Rng rng(1);
  AutoencoderSpec spec;
  spec.downscale = 2;
  spec.channels = 3;
  spec.schedule = {8};
  auto ae = AutoencoderT<float>::make(spec, rng);
  auto vs = build_view_set(make_scene(2, 0), 9, 8, 2);
  auto cache = build_latent_cache(ae, vs);
  const std::string dir = tmp.path.string();
  save_latent_cache(dir, cache);
  CHECK(latent_cache_exists(dir));

  auto loaded = load_latent_cache(dir);
  CHECK(loaded.fingerprint == cache.fingerprint);
  CHECK(loaded.pose_index == cache.pose_index);
  REQUIRE(loaded.latents.size() == cache.latents.size());
  for (size_t i = 0; i < cache.latents.size(); ++i)
    CHECK(loaded.latents[i] == cache.latents[i]);

  // binary layout: magic, version u32 = 1, count u32
  std::ifstream in(dir + "/latents.bin", std::ios::binary);
  char head[12];
  in.read(head, 12);
  CHECK(std::string(head, 4) == "IGLC");
  const auto u32 = [&](int off) {
    return static_cast<uint32_t>(static_cast<unsigned char>(head[off])) |
           (static_cast<uint32_t>(static_cast<unsigned char>(head[off + 1]))
            << 8) |
           (static_cast<uint32_t>(static_cast<unsigned char>(head[off + 2]))
            << 16) |
           (static_cast<uint32_t>(static_cast<unsigned char>(head[off + 3]))
            << 24);
  };
  CHECK(u32(4) == 1);
  CHECK(u32(8) == cache.latents.size());
}

TEST_CASE("view set save/load round trip") {
  TempDir tmp;
  auto scene = make_scene(11, 1);
  auto vs = build_view_set(scene, 9, 16, 5);
  const std::string dir = (tmp.path / "scene_000").string();
  save_view_set(dir, vs);
  auto loaded = load_view_set(dir);
  CHECK(loaded.scene_id == vs.scene_id);
  CHECK(loaded.held_out == vs.held_out);
  CHECK(loaded.fov_y == vs.fov_y);
  for (int i = 0; i < 9; ++i) {
    for (int k = 0; k < 9; ++k)
      CHECK(loaded.poses[i].rotation.m[k] ==
            doctest::Approx(vs.poses[i].rotation.m[k]).epsilon(1e-12));
    // images go through 8-bit quantization once
    CHECK(quantize_u8(loaded.images[i]) == quantize_u8(vs.images[i]));
  }
}

TEST_CASE("real surrogate stream is deterministic and in range") {
  auto a = real_surrogate_stream(6, 16, 42);
  auto b = real_surrogate_stream(6, 16, 42);
  CHECK(a.images.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(a.images[i].data == b.images[i].data);
    for (float v : a.images[i].data) {
      CHECK(v >= 0.f);
      CHECK(v <= 1.f);
    }
  }
  auto c = real_surrogate_stream(1, 16, 43);
  CHECK(c.images[0].data != a.images[0].data);
}

TEST_CASE("directory mode center-crops and resamples against an oracle") {
  TempDir tmp;
  // 200x300 gradient test card
  Image src(3, 200, 300);
  for (int y = 0; y < 200; ++y)
    for (int x = 0; x < 300; ++x) {
      src.at(0, y, x) = static_cast<float>(x) / 299.f;
      src.at(1, y, x) = static_cast<float>(y) / 199.f;
      src.at(2, y, x) = 0.25f;
    }
  write_png((tmp.path / "card.png").string(), src);
  auto set = real_images_from_directory(tmp.path.string(), 16);
  REQUIRE(set.images.size() == 1);
  CHECK(set.images[0].height == 16);
  CHECK(set.images[0].width == 16);

  // oracle: quantized source, center crop to 200x200 (x offset 50), then
  // exact area averaging over 12.5x12.5 source-pixel footprints
  auto q = read_png((tmp.path / "card.png").string());
  const double scale = 200.0 / 16.0;
  for (int c = 0; c < 3; ++c)
    for (int ty = 0; ty < 16; ty += 5)
      for (int tx = 0; tx < 16; tx += 5) {
        double acc = 0;
        const double sy0 = ty * scale, sy1 = (ty + 1) * scale;
        const double sx0 = tx * scale, sx1 = (tx + 1) * scale;
        for (int sy = static_cast<int>(sy0); sy < sy1 && sy < 200; ++sy)
          for (int sx = static_cast<int>(sx0); sx < sx1 && sx < 200; ++sx) {
            const double hy = std::min(sy1, sy + 1.0) - std::max(sy0, double(sy));
            const double hx = std::min(sx1, sx + 1.0) - std::max(sx0, double(sx));
            acc += hy * hx * q.at(c, sy, 50 + sx);
          }
        acc /= scale * scale;
        CHECK(set.images[0].at(c, ty, tx) ==
              doctest::Approx(acc).epsilon(1e-5));
      }
}

TEST_SUITE_END();
