#pragma once

#include <string>
#include <vector>

#include "igae/autoencoder.hpp"
#include "igae/geometry.hpp"
#include "igae/image.hpp"
#include "igae/scenes.hpp"

namespace igae {

// Posed ground-truth renderings of one scene with a deterministic
// every-8th-view held-out split.
struct PosedViewSet {
  int scene_id = 0;
  uint64_t seed = 0;
  int difficulty = 1;
  double fov_y = 0.9;
  int height = 64, width = 64;
  double scene_radius = 1.0;
  double camera_distance = 2.7;
  std::vector<CameraPose> poses;
  std::vector<Image> images;
  std::vector<uint8_t> held_out;  // 1 = evaluation view

  std::vector<int> train_indices() const {
    std::vector<int> out;
    for (size_t i = 0; i < held_out.size(); ++i)
      if (!held_out[i]) out.push_back(static_cast<int>(i));
    return out;
  }
  std::vector<int> heldout_indices() const {
    std::vector<int> out;
    for (size_t i = 0; i < held_out.size(); ++i)
      if (held_out[i]) out.push_back(static_cast<int>(i));
    return out;
  }
  std::pair<double, double> near_far() const {
    return near_far_for_sphere(camera_distance, scene_radius);
  }
};

struct LatentCache {
  int scene_id = 0;
  uint64_t fingerprint = 0;  // hash of the encoder parameters
  int h = 0, w = 0, c = 0;
  std::vector<uint32_t> pose_index;        // into the view set
  std::vector<std::vector<float>> latents;  // [c,h,w] planar, one per entry
};

struct RealImageSet {
  std::vector<Image> images;
};

PosedViewSet build_view_set(const ProceduralScene& scene, int views,
                            int extent, uint64_t seed,
                            double camera_distance = 2.7, double fov_y = 0.9);

// Encode all train views with the given autoencoder; one entry per train
// view, stamped with the encoder fingerprint.
LatentCache build_latent_cache(const AutoencoderT<float>& ae,
                               const PosedViewSet& views);

// Seeded multiscale-noise and gradient textures (ImageNet stand-in), or a
// user directory of images center-cropped and downscaled to extent^2.
RealImageSet real_surrogate_stream(int count, int extent, uint64_t seed);
RealImageSet real_images_from_directory(const std::string& dir, int extent);

// scene directory layout: meta.json + view_%03d.png + latents.bin/.json
void save_view_set(const std::string& scene_dir, const PosedViewSet& views);
PosedViewSet load_view_set(const std::string& scene_dir);

void save_latent_cache(const std::string& scene_dir, const LatentCache& cache);
LatentCache load_latent_cache(const std::string& scene_dir);
bool latent_cache_exists(const std::string& scene_dir);

void save_real_images(const std::string& dir, const RealImageSet& set);

// Tensor bridges ([C,H,W] float <-> Image)
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);

}  // namespace igae
