#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "igae/checkpoint.hpp"
#include "igae/config.hpp"
#include "igae/dataset.hpp"
#include "igae/metrics.hpp"
#include "igae/objectives.hpp"
#include "igae/optim.hpp"
#include "igae/renderer.hpp"

namespace igae {

// ---------------------------------------------------------------------------
// Field bundles
// ---------------------------------------------------------------------------

// Jointly trained latent scenes: per-scene tri-planes, one shared feature
// decoder, one learnable latent background.
struct LatentSceneSet {
  std::vector<TriPlaneT<float>> triplanes;
  FeatureDecoderT<float> decoder;
  Tensor beta;

  ParamList<float> params() const;  // planes + decoder + beta
  FieldFnT<float> scene_fn(int s) const {
    return field_fn(triplanes[s], decoder);
  }
};

// A single latent NeRF, either backend.
struct SceneField {
  std::string backend = "triplane";  // "triplane" | "mlp"
  TriPlaneT<float> triplane;
  FeatureDecoderT<float> fdec;
  MlpFieldT<float> mlp;
  Tensor beta;

  FieldFnT<float> fn() const {
    return backend == "triplane" ? field_fn(triplane, fdec) : field_fn(mlp);
  }
  ParamList<float> params() const;  // field parameters + beta
};

// Mean encoded value of an all-white image; the latent-space stand-in for
// the white RGB background.
Tensor latent_background_init(const AutoencoderT<float>& ae, int extent);

LatentSceneSet make_latent_scene_set(int scenes, const RunConfig& cfg,
                                     const AutoencoderT<float>& ae, Rng& rng);
SceneField make_scene_field(const RunConfig& cfg, double scene_radius,
                            const AutoencoderT<float>& ae, int extent,
                            Rng& rng);

// ---------------------------------------------------------------------------
// Run reporting
// ---------------------------------------------------------------------------

struct MetricsRow {
  int64_t step = 0;
  std::string stage;
  double loss = 0;
  double lr = 0;
  double wall_ms = 0;
  std::optional<double> latent_psnr, rgb_psnr, ssim;
};

struct RunReport {
  bool deterministic = false;  // zeroes the wall_ms column
  std::vector<MetricsRow> rows;
  nlohmann::json summary = nlohmann::json::object();

  void append(MetricsRow row);
  void extend(const RunReport& other);
  void write(const std::string& out_dir) const;  // metrics.csv + report.json
};

// ---------------------------------------------------------------------------
// Training procedures
// ---------------------------------------------------------------------------

// Baseline autoencoder: reconstruction (+ perceptual + latent TV) on the
// real-image stream, optionally mixed half-and-half with scene views so
// the encoder also covers the rendering domain. Every 8th real image is
// held out for evaluation.
RunReport train_autoencoder(AutoencoderT<float>& ae, const RealImageSet& real,
                            const PerceptualProxyT<float>& proxy,
                            const RunConfig& cfg, Rng& rng,
                            const std::vector<PosedViewSet>* scene_views =
                                nullptr);

// Fit the tri-plane set to cached (3D-inconsistent) latents of a frozen
// autoencoder. Throws if any cache fingerprint does not match the encoder.
RunReport pretrain_latent_scenes(const AutoencoderT<float>& ae,
                                 LatentSceneSet& scenes,
                                 const std::vector<PosedViewSet>& views,
                                 const std::vector<LatentCache>& caches,
                                 const RunConfig& cfg, Rng& rng);

// Joint training: each step samples a scene-view minibatch and a real
// minibatch and takes one Adam step per parameter group on the combined
// objective. Ablation flags only mask loss components; the sampling
// sequence is identical across {full, no_3d, no_pr} under equal seed.
RunReport train_igae_joint(AutoencoderT<float>& ae, LatentSceneSet& scenes,
                           const std::vector<PosedViewSet>& views,
                           const RealImageSet& real,
                           const PerceptualProxyT<float>& proxy,
                           const RunConfig& cfg, Rng& rng);

enum class NerfStage { ls, align, both };

struct LatentNerfResult {
  SceneField field;
  AutoencoderT<float> tuned_ae;  // shared AE with a fine-tuned decoder copy
  RunReport report;
  double heldout_latent_psnr = 0;
  double heldout_rgb_psnr = 0;
  double heldout_ssim = 0;
};

// Two-stage latent NeRF training. The shared autoencoder is never
// mutated; stage 2 fine-tunes a decoder copy. For stage == align, resume
// must hold the stage-1 field.
LatentNerfResult train_latent_nerf(const AutoencoderT<float>& ae,
                                   const PosedViewSet& views,
                                   const LatentCache& cache, NerfStage stage,
                                   const RunConfig& cfg,
                                   const SceneField* resume = nullptr);

// ---------------------------------------------------------------------------
// Evaluation built on the pipelines
// ---------------------------------------------------------------------------

// Per held-out pose: psnr/ssim between the field's latent rendering and
// the encoded ground-truth view.
std::vector<MetricRow> latent_nvs_eval(const AutoencoderT<float>& ae,
                                       const SceneField& field,
                                       const PosedViewSet& views,
                                       const RunConfig& cfg);

// Fit a fresh tri-plane to the encodings of the train views and score the
// mean normalized PSNR on held-out encodings. encode maps a view image to
// its "latent" image (the identity for the RGB probe).
double consistency_probe(const std::function<Image(const Image&)>& encode,
                         const PosedViewSet& views, const RunConfig& cfg,
                         uint64_t salt);

std::function<Image(const Image&)> ae_encoder_fn(const AutoencoderT<float>& ae);

// Wall-clock render/decode timing over repeated renders of the given poses.
BenchRow bench_render(const SceneField& field, const AutoencoderT<float>* ae,
                      const std::vector<CameraPose>& poses, int repeats,
                      const RunConfig& cfg, double scene_radius,
                      double camera_distance, int latent_extent);
BenchRow bench_render_rgb(const TriPlaneT<float>& tp,
                          const FeatureDecoderT<float>& dec,
                          const std::vector<CameraPose>& poses, int repeats,
                          const RunConfig& cfg, double scene_radius,
                          double camera_distance, int extent);

// ---------------------------------------------------------------------------
// Checkpoint bridges (self-describing via manifest meta)
// ---------------------------------------------------------------------------

Checkpoint make_ae_checkpoint(const AutoencoderT<float>& ae,
                              const Tensor* beta);
AutoencoderT<float> ae_from_checkpoint(const Checkpoint& ckpt,
                                       Tensor* beta_out = nullptr);

Checkpoint make_field_checkpoint(const SceneField& field, double scene_radius);
SceneField field_from_checkpoint(const Checkpoint& ckpt);

Checkpoint make_igae_checkpoint(const AutoencoderT<float>& ae,
                                const LatentSceneSet& scenes);

}  // namespace igae
