#pragma once

#include <string>

#include <json.hpp>

#include "igae/autoencoder.hpp"
#include "igae/objectives.hpp"

namespace igae {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetConfig {
  int scenes = 8;
  int views = 60;
  int extent = 64;
  int difficulty = 1;
  double camera_distance = 2.7;
  double fov_y = 0.9;
  int real_images = 512;
  std::string real_dir;  // optional: user images instead of textures
};

struct FieldConfig {
  std::string backend = "triplane";  // triplane | mlp
  int plane_resolution = 64;         // K
  int plane_features = 16;           // F
  int mlp_pe = 6;
  double bounds_scale = 1.1;  // field bounds = scene radius * scale
  int samples_train = 48;
  int samples_eval = 96;
};

struct OptimConfig {
  double lr_ae_pretrain = 1.5e-3;  // baseline AE trained from scratch
  double lr_encoder = 5e-5;
  double lr_decoder = 5e-5;
  double lr_triplane = 2e-3;  // also the shared feature decoder and beta
  double lr_field = 2e-2;     // latent NeRF base rate, modulated by xi
  double lr_decoder_align = 1e-4;
  double decay = 0.988;                 // per-epoch
  double decoder_align_decay = 0.9996;  // per-step
  double xi_ls = 0.1;
  double xi_align = 0.1;
};

struct TrainConfig {
  int ae_pretrain_steps = 2000;
  int pretrain_epochs = 10;
  int joint_epochs = 30;
  int ls_iters = 2000;
  int align_iters = 3000;
  int batch_views = 4;
  int batch_real = 2;
  int eval_interval = 250;
  int probe_iters = 400;
  bool ls_plane_tv = true;  // plane TV regularizer during latent supervision
  bool no_3d = false;
  bool no_pr = false;
  LossWeights weights;
};

struct RunConfig {
  uint64_t seed = 0;
  bool deterministic = false;
  std::string out_dir = "runs/out";
  DatasetConfig dataset;
  AutoencoderSpec ae{4, 8, {32, 64}, "silu"};
  FieldConfig field;
  OptimConfig optim;
  TrainConfig train;

  void validate() const;
};

// Strict parse: unknown keys anywhere are rejected with a schema message.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);

}  // namespace igae
