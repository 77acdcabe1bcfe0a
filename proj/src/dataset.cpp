#include "igae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace igae {

namespace {

// temp file + rename so readers never observe partial writes
void write_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  fs::rename(tmp, path);
}

void append_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("latents.bin: truncated header");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

json pose_to_json(const CameraPose& p) {
  // 4x4 row-major camera-to-world
  json m = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m.push_back(p.rotation.m[r * 3 + c]);
  // interleave translation as the 4th column
  json full = json::array();
  const double t[3] = {p.translation.x, p.translation.y, p.translation.z};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) full.push_back(p.rotation.m[r * 3 + c]);
    full.push_back(t[r]);
  }
  full.push_back(0.0);
  full.push_back(0.0);
  full.push_back(0.0);
  full.push_back(1.0);
  (void)m;
  return full;
}

CameraPose pose_from_json(const json& full, double fov_y, int h, int w) {
  if (!full.is_array() || full.size() != 16)
    throw std::runtime_error("meta.json: pose must be a 16-float matrix");
  CameraPose p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      p.rotation.m[r * 3 + c] = full[r * 4 + c].get<double>();
  p.translation = {full[3].get<double>(), full[7].get<double>(),
                   full[11].get<double>()};
  p.fov_y = fov_y;
  p.height = h;
  p.width = w;
  return p;
}

float value_noise(Rng lattice_key, int cell_x, int cell_y) {
  // one deterministic draw per lattice cell
  Rng cell = lattice_key.derive((static_cast<uint64_t>(cell_x) << 32) ^
                                static_cast<uint64_t>(static_cast<uint32_t>(cell_y)));
  return static_cast<float>(cell.uniform());
}

// bilinear multiscale value noise in [0,1]
float octave_noise(const Rng& key, double x, double y, int octaves) {
  double acc = 0.0, amp = 1.0, norm = 0.0;
  for (int o = 0; o < octaves; ++o) {
    const double cells = 3.0 * (1 << o);
    const double fx = x * cells, fy = y * cells;
    const int x0 = static_cast<int>(fx), y0 = static_cast<int>(fy);
    const double ax = fx - x0, ay = fy - y0;
    Rng okey = key.derive(static_cast<uint64_t>(o) + 101);
    const double v00 = value_noise(okey, x0, y0);
    const double v01 = value_noise(okey, x0 + 1, y0);
    const double v10 = value_noise(okey, x0, y0 + 1);
    const double v11 = value_noise(okey, x0 + 1, y0 + 1);
    const double v = (1 - ay) * ((1 - ax) * v00 + ax * v01) +
                     ay * ((1 - ax) * v10 + ax * v11);
    acc += amp * v;
    norm += amp;
    amp *= 0.55;
  }
  return static_cast<float>(acc / norm);
}

}  // namespace

PosedViewSet build_view_set(const ProceduralScene& scene, int views,
                            int extent, uint64_t seed, double camera_distance,
                            double fov_y) {
  if (views < 1) throw std::invalid_argument("build_view_set: views < 1");
  PosedViewSet vs;
  vs.scene_id = static_cast<int>(scene.seed & 0x7fffffff);
  vs.seed = seed;
  vs.difficulty = scene.difficulty;
  vs.fov_y = fov_y;
  vs.height = vs.width = extent;
  vs.scene_radius = scene.radius;
  vs.camera_distance = camera_distance;
  Rng rng(Rng(seed).derive("views").next_u64());
  vs.poses = sample_poses_on_sphere(views, camera_distance, rng, fov_y, extent,
                                    extent);
  vs.images.reserve(views);
  for (const auto& pose : vs.poses)
    vs.images.push_back(render_gt_view(scene, pose, extent, extent));
  vs.held_out.assign(views, 0);
  for (int i = 0; i < views; i += 8) vs.held_out[i] = 1;
  return vs;
}

LatentCache build_latent_cache(const AutoencoderT<float>& ae,
                               const PosedViewSet& views) {
  LatentCache cache;
  cache.scene_id = views.scene_id;
  cache.fingerprint = encoder_fingerprint(ae);
  const int l = ae.spec.downscale;
  cache.h = views.height / l;
  cache.w = views.width / l;
  cache.c = ae.spec.channels;
  for (int idx : views.train_indices()) {
    auto z = ae.encode(reshape(image_to_tensor(views.images[idx]),
                               {1, 3, views.height, views.width}));
    cache.pose_index.push_back(static_cast<uint32_t>(idx));
    cache.latents.push_back(z.data());
  }
  return cache;
}

RealImageSet real_surrogate_stream(int count, int extent, uint64_t seed) {
  RealImageSet set;
  set.images.reserve(count);
  Rng base(Rng(seed).derive("real-surrogate").next_u64());
  for (int i = 0; i < count; ++i) {
    Rng key = base.derive(static_cast<uint64_t>(i));
    Image img(3, extent, extent);
    const bool gradient_kind = (i % 2) == 1;
    // two anchor colors and a direction drive the gradient component
    const float c0[3] = {static_cast<float>(key.uniform()),
                         static_cast<float>(key.uniform()),
                         static_cast<float>(key.uniform())};
    const float c1[3] = {static_cast<float>(key.uniform()),
                         static_cast<float>(key.uniform()),
                         static_cast<float>(key.uniform())};
    const double ang = key.uniform() * 2.0 * 3.14159265358979;
    const double gx = std::cos(ang), gy = std::sin(ang);
    const int octaves = gradient_kind ? 2 : 3;
    const double noise_amp = gradient_kind ? 0.15 : 0.65;
    for (int c = 0; c < 3; ++c) {
      Rng ckey = key.derive(static_cast<uint64_t>(c) + 7);
      for (int y = 0; y < extent; ++y)
        for (int x = 0; x < extent; ++x) {
          const double u = (x + 0.5) / extent, v = (y + 0.5) / extent;
          const double t = 0.5 + 0.5 * ((u - 0.5) * gx + (v - 0.5) * gy) * 2.0;
          const double grad = c0[c] * (1.0 - t) + c1[c] * t;
          const double n = octave_noise(ckey, u, v, octaves) - 0.5;
          img.at(c, y, x) = static_cast<float>(
              std::clamp(grad + noise_amp * n, 0.0, 1.0));
        }
    }
    set.images.push_back(std::move(img));
  }
  return set;
}

RealImageSet real_images_from_directory(const std::string& dir, int extent) {
  RealImageSet set;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty())
    throw std::runtime_error("real_images_from_directory: no .png files in " +
                             dir);
  for (const auto& f : files)
    set.images.push_back(center_crop_resample(read_png(f.string()), extent));
  return set;
}

void save_view_set(const std::string& scene_dir, const PosedViewSet& views) {
  fs::create_directories(scene_dir);
  json meta;
  meta["scene_id"] = views.scene_id;
  meta["seed"] = views.seed;
  meta["difficulty"] = views.difficulty;
  meta["fov_y"] = views.fov_y;
  meta["extent"] = {views.height, views.width};
  meta["radius"] = views.scene_radius;
  meta["camera_distance"] = views.camera_distance;
  json poses = json::array();
  for (const auto& p : views.poses) poses.push_back(pose_to_json(p));
  meta["poses"] = poses;
  json split = json::array();
  for (uint8_t h : views.held_out) split.push_back(h ? 1 : 0);
  meta["split"] = split;
  write_atomic(scene_dir + "/meta.json", meta.dump(1));

  char name[32];
  for (size_t i = 0; i < views.images.size(); ++i) {
    std::snprintf(name, sizeof name, "/view_%03zu.png", i);
    write_png(scene_dir + name, views.images[i]);
  }
}

PosedViewSet load_view_set(const std::string& scene_dir) {
  std::ifstream in(scene_dir + "/meta.json");
  if (!in) throw std::runtime_error("missing " + scene_dir + "/meta.json");
  json meta = json::parse(in);
  PosedViewSet vs;
  vs.scene_id = meta.at("scene_id").get<int>();
  vs.seed = meta.at("seed").get<uint64_t>();
  vs.difficulty = meta.value("difficulty", 1);
  vs.fov_y = meta.at("fov_y").get<double>();
  vs.height = meta.at("extent")[0].get<int>();
  vs.width = meta.at("extent")[1].get<int>();
  vs.scene_radius = meta.at("radius").get<double>();
  vs.camera_distance = meta.at("camera_distance").get<double>();
  for (const auto& pj : meta.at("poses"))
    vs.poses.push_back(pose_from_json(pj, vs.fov_y, vs.height, vs.width));
  for (const auto& s : meta.at("split"))
    vs.held_out.push_back(s.get<int>() ? 1 : 0);
  if (vs.held_out.size() != vs.poses.size())
    throw std::runtime_error("meta.json: split/pose length mismatch");
  char name[32];
  for (size_t i = 0; i < vs.poses.size(); ++i) {
    std::snprintf(name, sizeof name, "/view_%03zu.png", i);
    vs.images.push_back(read_png(scene_dir + name));
    if (vs.images.back().height != vs.height ||
        vs.images.back().width != vs.width)
      throw std::runtime_error("view image extent mismatch in " + scene_dir);
  }
  return vs;
}

void save_latent_cache(const std::string& scene_dir, const LatentCache& cache) {
  // latents.bin: magic IGLC, version u32, count u32, then per entry a
  // pose-index u32 followed by h*w*c little-endian floats ([c,h,w] planar)
  std::string bytes;
  bytes += "IGLC";
  append_u32(bytes, 1);
  append_u32(bytes, static_cast<uint32_t>(cache.latents.size()));
  for (size_t i = 0; i < cache.latents.size(); ++i) {
    append_u32(bytes, cache.pose_index[i]);
    const auto& lat = cache.latents[i];
    const size_t expect = static_cast<size_t>(cache.h) * cache.w * cache.c;
    if (lat.size() != expect)
      throw std::runtime_error("latent cache entry has wrong extent");
    const char* p = reinterpret_cast<const char*>(lat.data());
    bytes.append(p, p + lat.size() * sizeof(float));
  }
  write_atomic(scene_dir + "/latents.bin", bytes);

  json side;
  side["fingerprint"] = cache.fingerprint;
  side["h"] = cache.h;
  side["w"] = cache.w;
  side["c"] = cache.c;
  side["scene_id"] = cache.scene_id;
  write_atomic(scene_dir + "/latents.json", side.dump(1));
}

bool latent_cache_exists(const std::string& scene_dir) {
  return fs::exists(scene_dir + "/latents.bin") &&
         fs::exists(scene_dir + "/latents.json");
}

LatentCache load_latent_cache(const std::string& scene_dir) {
  std::ifstream side_in(scene_dir + "/latents.json");
  if (!side_in)
    throw std::runtime_error("missing " + scene_dir + "/latents.json");
  json side = json::parse(side_in);
  LatentCache cache;
  cache.fingerprint = side.at("fingerprint").get<uint64_t>();
  cache.h = side.at("h").get<int>();
  cache.w = side.at("w").get<int>();
  cache.c = side.at("c").get<int>();
  cache.scene_id = side.value("scene_id", 0);

  std::ifstream in(scene_dir + "/latents.bin", std::ios::binary);
  if (!in) throw std::runtime_error("missing " + scene_dir + "/latents.bin");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "IGLC")
    throw std::runtime_error("latents.bin: bad magic");
  const uint32_t version = read_u32(in);
  if (version != 1)
    throw std::runtime_error("latents.bin: unsupported version " +
                             std::to_string(version));
  const uint32_t count = read_u32(in);
  const size_t n = static_cast<size_t>(cache.h) * cache.w * cache.c;
  for (uint32_t i = 0; i < count; ++i) {
    cache.pose_index.push_back(read_u32(in));
    std::vector<float> lat(n);
    in.read(reinterpret_cast<char*>(lat.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw std::runtime_error("latents.bin: truncated payload");
    cache.latents.push_back(std::move(lat));
  }
  return cache;
}

void save_real_images(const std::string& dir, const RealImageSet& set) {
  fs::create_directories(dir);
  char name[32];
  for (size_t i = 0; i < set.images.size(); ++i) {
    std::snprintf(name, sizeof name, "/img_%04zu.png", i);
    write_png(dir + name, set.images[i]);
  }
}

Tensor image_to_tensor(const Image& img) {
  return Tensor::from_data({img.channels, img.height, img.width}, img.data);
}

Image tensor_to_image(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.size() != 3)
    throw std::invalid_argument("tensor_to_image: expected [C,H,W], got " +
                                shape_str(s));
  Image img(s[0], s[1], s[2]);
  img.data = t.data();
  return img;
}

}  // namespace igae
