#include "igae/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "igae/pipelines.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace igae {

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  int64_t seed = -1;
  bool deterministic = false;
};

RunConfig effective_config(const GlobalArgs& g) {
  RunConfig cfg = g.config_path.empty() ? RunConfig{}
                                        : load_run_config(g.config_path);
  if (g.seed >= 0) cfg.seed = static_cast<uint64_t>(g.seed);
  if (g.deterministic) cfg.deterministic = true;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  cfg.validate();
  return cfg;
}

std::string dataset_dir(const GlobalArgs& g, const RunConfig& cfg) {
  return g.data_dir.empty() ? cfg.out_dir + "/dataset" : g.data_dir;
}

std::string scene_dir(const std::string& data, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "/scene_%03d", index);
  return data + buf;
}

void echo_config(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  std::ofstream out(cfg.out_dir + "/config.json");
  out << run_config_to_json(cfg).dump(1);
}

std::vector<PosedViewSet> load_all_scenes(const std::string& data) {
  std::vector<PosedViewSet> views;
  for (int s = 0;; ++s) {
    const std::string dir = scene_dir(data, s);
    if (!fs::exists(dir + "/meta.json")) break;
    views.push_back(load_view_set(dir));
  }
  if (views.empty())
    throw std::runtime_error("no scenes under " + data +
                             " (run gen-data first)");
  return views;
}

RealImageSet load_real_images(const std::string& data, const RunConfig& cfg) {
  if (!cfg.dataset.real_dir.empty())
    return real_images_from_directory(cfg.dataset.real_dir,
                                      cfg.dataset.extent);
  const std::string dir = data + "/real";
  if (fs::exists(dir)) return real_images_from_directory(dir, cfg.dataset.extent);
  return real_surrogate_stream(cfg.dataset.real_images, cfg.dataset.extent,
                               cfg.seed);
}

// ---------------------------------------------------------------------- gen

int cmd_gen_data(const GlobalArgs& g) {
  RunConfig cfg = effective_config(g);
  echo_config(cfg);
  const std::string data = dataset_dir(g, cfg);
  Rng seeds = Rng(cfg.seed).derive("dataset");
  for (int s = 0; s < cfg.dataset.scenes; ++s) {
    auto scene = make_scene(seeds.derive(static_cast<uint64_t>(s)).next_u64(),
                            cfg.dataset.difficulty);
    auto vs = build_view_set(scene, cfg.dataset.views, cfg.dataset.extent,
                             seeds.derive(1000 + static_cast<uint64_t>(s)).next_u64(),
                             cfg.dataset.camera_distance, cfg.dataset.fov_y);
    vs.scene_id = s;
    save_view_set(scene_dir(data, s), vs);
    std::printf("scene_%03d: %d views at %dx%d\n", s, cfg.dataset.views,
                cfg.dataset.extent, cfg.dataset.extent);
  }
  auto real = real_surrogate_stream(cfg.dataset.real_images,
                                    cfg.dataset.extent, cfg.seed);
  save_real_images(data + "/real", real);
  std::printf("real: %d images\nwrote %s\n", cfg.dataset.real_images,
              data.c_str());
  return 0;
}

// ------------------------------------------------------------------- shared

AutoencoderT<float> obtain_ae(const std::string& ae_ckpt, const RunConfig& cfg,
                              const std::vector<PosedViewSet>& views,
                              const RealImageSet& real, Tensor* beta_out,
                              bool* trained_fresh) {
  if (!ae_ckpt.empty()) {
    if (trained_fresh) *trained_fresh = false;
    return ae_from_checkpoint(load_checkpoint(ae_ckpt), beta_out);
  }
  if (trained_fresh) *trained_fresh = true;
  Rng init = Rng(cfg.seed).derive("ae-init");
  auto ae = AutoencoderT<float>::make(cfg.ae, init);
  auto proxy = PerceptualProxyT<float>::make(cfg.seed);
  Rng rng = Rng(cfg.seed).derive("ae-pretrain");
  auto rep = train_autoencoder(ae, real, proxy, cfg, rng, &views);
  std::printf("baseline AE: held-out psnr %.2f dB\n",
              rep.summary["ae_heldout_psnr"].get<double>());
  save_checkpoint(cfg.out_dir + "/ae_baseline.ckpt",
                  make_ae_checkpoint(ae, nullptr));
  return ae;
}

std::vector<LatentCache> build_or_load_caches(
    const AutoencoderT<float>& ae, const std::vector<PosedViewSet>& views,
    const std::string& data) {
  const uint64_t fp = encoder_fingerprint(ae);
  std::vector<LatentCache> caches;
  for (size_t s = 0; s < views.size(); ++s) {
    const std::string dir = scene_dir(data, static_cast<int>(s));
    if (latent_cache_exists(dir)) {
      auto cache = load_latent_cache(dir);
      if (cache.fingerprint == fp) {
        caches.push_back(std::move(cache));
        continue;
      }
      // stale: rebuild against the current encoder
    }
    auto cache = build_latent_cache(ae, views[s]);
    save_latent_cache(dir, cache);
    caches.push_back(std::move(cache));
  }
  return caches;
}

// --------------------------------------------------------------- pretrain

int cmd_pretrain_scenes(const GlobalArgs& g, const std::string& ae_ckpt) {
  RunConfig cfg = effective_config(g);
  echo_config(cfg);
  const std::string data = dataset_dir(g, cfg);
  auto views = load_all_scenes(data);
  auto real = load_real_images(data, cfg);
  Tensor beta;
  auto ae = obtain_ae(ae_ckpt, cfg, views, real, &beta, nullptr);
  auto caches = build_or_load_caches(ae, views, data);

  Rng init = Rng(cfg.seed).derive("scenes-init");
  auto scenes =
      make_latent_scene_set(static_cast<int>(views.size()), cfg, ae, init);
  Rng rng = Rng(cfg.seed).derive("pretrain");
  auto rep = pretrain_latent_scenes(ae, scenes, views, caches, cfg, rng);
  rep.summary["config"] = run_config_to_json(cfg);
  rep.write(cfg.out_dir);
  save_checkpoint(cfg.out_dir + "/scenes_pretrained.ckpt",
                  make_igae_checkpoint(ae, scenes));
  std::printf("pretrain: train latent psnr %.2f dB\n",
              rep.summary["pretrain_train_latent_psnr"].get<double>());
  return 0;
}

// --------------------------------------------------------------- train-igae

int cmd_train_igae(const GlobalArgs& g, const std::string& ae_ckpt,
                   bool no_3d, bool no_pr) {
  RunConfig cfg = effective_config(g);
  cfg.train.no_3d = no_3d;
  cfg.train.no_pr = no_pr;
  cfg.validate();  // rejects the degenerate no_3d + no_pr combination
  echo_config(cfg);
  const std::string data = dataset_dir(g, cfg);
  auto views = load_all_scenes(data);
  auto real = load_real_images(data, cfg);
  auto proxy = PerceptualProxyT<float>::make(cfg.seed);

  Tensor beta;
  auto ae = obtain_ae(ae_ckpt, cfg, views, real, &beta, nullptr);
  auto caches = build_or_load_caches(ae, views, data);

  Rng init = Rng(cfg.seed).derive("scenes-init");
  auto scenes =
      make_latent_scene_set(static_cast<int>(views.size()), cfg, ae, init);
  Rng pre_rng = Rng(cfg.seed).derive("pretrain");
  auto rep = pretrain_latent_scenes(ae, scenes, views, caches, cfg, pre_rng);

  Rng joint_rng = Rng(cfg.seed).derive("joint");
  auto joint = train_igae_joint(ae, scenes, views, real, proxy, cfg, joint_rng);
  rep.extend(joint);
  rep.summary["config"] = run_config_to_json(cfg);
  rep.write(cfg.out_dir);
  save_checkpoint(cfg.out_dir + "/igae.ckpt",
                  make_igae_checkpoint(ae, scenes));
  std::printf("igae: held-out real psnr %.2f dB, latent consistency %.2f dB\n",
              rep.summary["igae_heldout_real_psnr"].get<double>(),
              rep.summary["igae_heldout_latent_psnr"].get<double>());
  return 0;
}

// --------------------------------------------------------------- train-nerf

int cmd_train_nerf(const GlobalArgs& g, const std::string& ae_ckpt,
                   const std::string& backend, const std::string& stage_str,
                   const std::string& field_ckpt, int scene_index) {
  RunConfig cfg = effective_config(g);
  if (!backend.empty()) cfg.field.backend = backend;
  cfg.validate();
  echo_config(cfg);
  const std::string data = dataset_dir(g, cfg);
  auto views = load_view_set(scene_dir(data, scene_index));

  if (ae_ckpt.empty())
    throw CLI::ValidationError("--ae", "train-nerf requires --ae <ckpt>");
  Tensor beta;
  auto ae = ae_from_checkpoint(load_checkpoint(ae_ckpt), &beta);

  NerfStage stage = NerfStage::both;
  if (stage_str == "ls") stage = NerfStage::ls;
  else if (stage_str == "align") stage = NerfStage::align;
  else if (stage_str != "both" && !stage_str.empty())
    throw CLI::ValidationError("--stage", "must be ls, align or both");

  const uint64_t fp = encoder_fingerprint(ae);
  const std::string sdir = scene_dir(data, scene_index);
  LatentCache cache;
  if (latent_cache_exists(sdir)) {
    cache = load_latent_cache(sdir);
    if (cache.fingerprint != fp) cache = build_latent_cache(ae, views);
  } else {
    cache = build_latent_cache(ae, views);
  }
  save_latent_cache(sdir, cache);

  SceneField resume;
  const SceneField* resume_ptr = nullptr;
  if (stage == NerfStage::align) {
    if (field_ckpt.empty())
      throw CLI::ValidationError(
          "--field", "--stage align requires --field <stage-1 ckpt>");
    resume = field_from_checkpoint(load_checkpoint(field_ckpt));
    resume_ptr = &resume;
  }

  auto result = train_latent_nerf(ae, views, cache, stage, cfg, resume_ptr);
  result.report.summary["config"] = run_config_to_json(cfg);
  result.report.write(cfg.out_dir);

  Checkpoint ckpt = make_field_checkpoint(result.field, views.scene_radius);
  // carry the shared encoder and the (possibly fine-tuned) decoder so the
  // checkpoint evaluates stand-alone
  ckpt.add_params(ae.encoder_params(), "encoder");
  ckpt.add_params(result.tuned_ae.decoder_params(), "decoder");
  ckpt.meta["ae"] = {{"downscale", ae.spec.downscale},
                     {"channels", ae.spec.channels},
                     {"schedule", ae.spec.schedule}};
  char name[64];
  std::snprintf(name, sizeof name, "/nerf_scene%03d_%s.ckpt", scene_index,
                stage_str.empty() ? "both" : stage_str.c_str());
  save_checkpoint(cfg.out_dir + name, ckpt);
  std::printf(
      "train-nerf (%s, %s): held-out latent %.2f dB, rgb %.2f dB, ssim %.4f\n",
      cfg.field.backend.c_str(), stage_str.empty() ? "both" : stage_str.c_str(),
      result.heldout_latent_psnr, result.heldout_rgb_psnr,
      result.heldout_ssim);
  return 0;
}

// -------------------------------------------------------------------- render

int cmd_render(const GlobalArgs& g, const std::string& ckpt_path,
               const std::string& ae_ckpt, int scene_index, int pose_index,
               bool latent, bool rgb, const std::string& out_path) {
  RunConfig cfg = effective_config(g);
  const std::string data = dataset_dir(g, cfg);
  auto views = load_view_set(scene_dir(data, scene_index));
  if (pose_index < 0 || pose_index >= static_cast<int>(views.poses.size()))
    throw CLI::ValidationError("--pose-index", "out of range");
  if (latent == rgb)
    throw CLI::ValidationError("--latent/--rgb", "choose exactly one");

  auto ckpt = load_checkpoint(ckpt_path);
  auto field = field_from_checkpoint(ckpt);
  const int c = field.beta.shape()[0];
  const auto [near, far] = views.near_far();

  int h = 0, w = 0;
  AutoencoderT<float> dec_ae;
  bool have_decoder = false;
  if (ckpt.meta.contains("ae") && ckpt.has_role("decoder")) {
    dec_ae = ae_from_checkpoint(ckpt, nullptr);
    have_decoder = true;
  } else if (!ae_ckpt.empty()) {
    dec_ae = ae_from_checkpoint(load_checkpoint(ae_ckpt), nullptr);
    have_decoder = true;
  }
  if (have_decoder) {
    h = views.height / dec_ae.spec.downscale;
    w = views.width / dec_ae.spec.downscale;
  } else {
    // field checkpoints pair with an autoencoder; without one, fall back
    // to the stored channel count and a quarter-resolution grid
    h = views.height / 4;
    w = views.width / 4;
  }

  Rng rng(0);
  auto render = render_image(field.fn(), views.poses[pose_index], h, w,
                             cfg.field.samples_eval,
                             BackgroundModelT<float>::latent(field.beta), rng,
                             false, near, far);
  fs::create_directories(fs::path(out_path).parent_path().empty()
                             ? "."
                             : fs::path(out_path).parent_path().string());
  if (latent) {
    Image lat(c, h, w);
    lat.data = render.values.data();
    // first three channels, per-channel normalized, as an h x w preview
    Image norm = normalize_per_channel(lat);
    Image preview(3, h, w);
    for (int ch = 0; ch < 3; ++ch) {
      const int src = ch < c ? ch : c - 1;
      std::copy_n(norm.data.begin() + static_cast<size_t>(src) * h * w,
                  static_cast<size_t>(h) * w,
                  preview.data.begin() + static_cast<size_t>(ch) * h * w);
    }
    write_png(out_path, preview);
    write_png(out_path + ".grid.png", channel_grid(lat));
    std::printf("wrote %s (%dx%d latent preview) and %s.grid.png\n",
                out_path.c_str(), w, h, out_path.c_str());
  } else {
    if (!have_decoder)
      throw CLI::ValidationError("--rgb", "needs a decoder: pass --ae");
    auto decoded =
        dec_ae.decode(reshape(render.values, {1, c, h, w}));
    write_png(out_path, tensor_to_image(slice_batch_item(decoded, 0)));
    std::printf("wrote %s (%dx%d rgb)\n", out_path.c_str(), views.width,
                views.height);
  }
  return 0;
}

// ---------------------------------------------------------------------- eval

int cmd_eval(const GlobalArgs& g, const std::string& ckpt_path,
             const std::string& ae_ckpt) {
  RunConfig cfg = effective_config(g);
  const std::string data = dataset_dir(g, cfg);
  auto ckpt = load_checkpoint(ckpt_path);
  const std::string kind = ckpt.meta.value("kind", "");
  fs::create_directories(cfg.out_dir);
  json summary;
  std::vector<MetricRow> rows;

  if (kind == "field") {
    auto field = field_from_checkpoint(ckpt);
    AutoencoderT<float> ae;
    if (ckpt.meta.contains("ae") && ckpt.has_role("decoder"))
      ae = ae_from_checkpoint(ckpt, nullptr);
    else if (!ae_ckpt.empty())
      ae = ae_from_checkpoint(load_checkpoint(ae_ckpt), nullptr);
    else
      throw CLI::ValidationError("--ae",
                                 "field checkpoint carries no decoder; pass "
                                 "--ae for decoding");
    // evaluate against scene 0 unless the checkpoint names one
    auto views = load_view_set(scene_dir(data, 0));
    rows = latent_nvs_eval(ae, field, views, cfg);
    double lat = 0;
    for (const auto& r : rows) lat += r.psnr;
    summary["mean_latent_psnr"] = rows.empty() ? 0 : lat / rows.size();
    // decoded space rows
    const auto held = views.heldout_indices();
    const int h = views.height / ae.spec.downscale;
    const auto [near, far] = views.near_far();
    double racc = 0, sacc = 0;
    for (int v : held) {
      Rng rng(0);
      auto render = render_image(field.fn(), views.poses[v], h, h,
                                 cfg.field.samples_eval,
                                 BackgroundModelT<float>::latent(field.beta),
                                 rng, false, near, far);
      auto decoded = ae.decode(
          reshape(render.values, {1, field.beta.shape()[0], h, h}));
      const Image img = tensor_to_image(slice_batch_item(decoded, 0));
      MetricRow row{views.scene_id, v, "rgb", psnr(views.images[v], img),
                    ssim(views.images[v], img)};
      racc += row.psnr;
      sacc += row.ssim;
      rows.push_back(row);
    }
    if (!held.empty()) {
      summary["mean_rgb_psnr"] = racc / held.size();
      summary["mean_rgb_ssim"] = sacc / held.size();
    }
  } else if (kind == "ae" || kind == "igae") {
    auto ae = ae_from_checkpoint(ckpt, nullptr);
    auto views = load_all_scenes(data);
    double acc = 0, sacc = 0;
    int n = 0;
    for (const auto& vs : views)
      for (int v : vs.heldout_indices()) {
        auto x = reshape(image_to_tensor(vs.images[v]),
                         {1, 3, vs.height, vs.width});
        auto recon = ae.decode(ae.encode(x));
        const Image img = tensor_to_image(slice_batch_item(recon, 0));
        MetricRow row{vs.scene_id, v, "rgb", psnr(vs.images[v], img),
                      ssim(vs.images[v], img)};
        acc += row.psnr;
        sacc += row.ssim;
        rows.push_back(row);
        ++n;
      }
    summary["mean_recon_psnr"] = n ? acc / n : 0;
    summary["mean_recon_ssim"] = n ? sacc / n : 0;
  } else {
    throw std::runtime_error("eval: unsupported checkpoint kind '" + kind +
                             "'");
  }

  write_metric_rows(cfg.out_dir + "/metrics.csv", rows);
  std::ofstream rj(cfg.out_dir + "/report.json");
  rj << summary.dump(1);
  std::printf("eval: %s\n", summary.dump().c_str());
  return 0;
}

// --------------------------------------------------------------------- bench

int cmd_bench(const GlobalArgs& g, const std::string& ckpt_path,
              const std::string& ae_ckpt, int repeats, int train_steps) {
  RunConfig cfg = effective_config(g);
  fs::create_directories(cfg.out_dir);
  Rng rng(cfg.seed);
  Rng init = rng.derive("bench-init");
  const double radius = 1.0, distance = cfg.dataset.camera_distance;
  Rng pose_rng = rng.derive("bench-poses");
  auto poses = sample_poses_on_sphere(8, distance, pose_rng,
                                      cfg.dataset.fov_y, cfg.dataset.extent,
                                      cfg.dataset.extent);

  AutoencoderT<float> ae;
  bool have_ae = false;
  SceneField field;
  if (!ckpt_path.empty()) {
    field = field_from_checkpoint(load_checkpoint(ckpt_path));
    if (!ae_ckpt.empty()) {
      ae = ae_from_checkpoint(load_checkpoint(ae_ckpt), nullptr);
      have_ae = true;
    }
  } else {
    ae = AutoencoderT<float>::make(cfg.ae, init);
    have_ae = true;
    field = make_scene_field(cfg, radius, ae, cfg.dataset.extent, init);
  }
  const int latent_extent =
      cfg.dataset.extent / (have_ae ? ae.spec.downscale : 4);

  std::vector<BenchRow> bench;
  bench.push_back(bench_render(field, have_ae ? &ae : nullptr, poses, repeats,
                               cfg, radius, distance, latent_extent));

  // rgb reference field with the same backbone
  auto rgb_tp = TriPlaneT<float>::make(cfg.field.plane_resolution,
                                       cfg.field.plane_features,
                                       radius * cfg.field.bounds_scale, init);
  auto rgb_dec = FeatureDecoderT<float>::make(cfg.field.plane_features, 3,
                                              ChannelKind::rgb, init);
  bench.push_back(bench_render_rgb(rgb_tp, rgb_dec, poses, repeats, cfg,
                                   radius, distance, cfg.dataset.extent));

  if (train_steps > 0) {
    // direct measurement of a short latent-space vs rgb-space fit
    auto scene = make_scene(rng.derive("bench-scene").next_u64(), 0);
    auto vs = build_view_set(scene, 16, cfg.dataset.extent,
                             rng.derive("bench-views").next_u64(),
                             distance, cfg.dataset.fov_y);
    if (have_ae) {
      auto cache = build_latent_cache(ae, vs);
      RunConfig tcfg = cfg;
      tcfg.train.ls_iters = train_steps;
      tcfg.train.align_iters = 1;
      tcfg.train.eval_interval = train_steps + 1;
      const auto t0 = std::chrono::steady_clock::now();
      (void)train_latent_nerf(ae, vs, cache, NerfStage::ls, tcfg);
      bench[0].train_minutes =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count() /
          60.0;
    }
    {
      // rgb-space fit of the same backbone for the same step count
      Rng fit_rng = rng.derive("bench-rgb-fit");
      ParamList<float> params;
      rgb_tp.collect_params("triplane", params);
      rgb_dec.collect_params("feature_decoder", params);
      AdamT<float> opt(params);
      const auto [near, far] = vs.near_far();
      const auto fn = field_fn(rgb_tp, rgb_dec);
      const auto train_idx = vs.train_indices();
      const auto t0 = std::chrono::steady_clock::now();
      for (int step = 0; step < train_steps; ++step) {
        opt.zero_grad();
        Tensor loss = Tensor::scalar(0.f);
        for (int bi = 0; bi < cfg.train.batch_views; ++bi) {
          const int v = train_idx[fit_rng.next_below(train_idx.size())];
          auto render = render_image(fn, vs.poses[v], vs.height, vs.width,
                                     cfg.field.samples_train,
                                     BackgroundModelT<float>::white_rgb(),
                                     fit_rng, true, near, far);
          loss = add(loss, mse(render.values, image_to_tensor(vs.images[v])));
        }
        loss.backward();
        opt.step(cfg.optim.lr_triplane);
      }
      bench[1].train_minutes =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
              .count() /
          60.0;
    }
  }

  write_bench_rows(cfg.out_dir + "/bench.csv", bench);
  for (const auto& row : bench)
    std::printf("%s/%s: render %.2f ms, decode %.2f ms, pixels %lld, train "
                "%.2f min\n",
                row.backend.c_str(), row.space.c_str(), row.mean_render_ms,
                row.mean_decode_ms, static_cast<long long>(row.pixels_touched),
                row.train_minutes);
  return 0;
}

// ------------------------------------------------------------ probe

int cmd_probe(const GlobalArgs& g, const std::string& ae_ckpt, bool rgb_probe) {
  RunConfig cfg = effective_config(g);
  const std::string data = dataset_dir(g, cfg);
  auto views = load_all_scenes(data);
  fs::create_directories(cfg.out_dir);

  std::function<Image(const Image&)> encode;
  std::string space = "latent";
  AutoencoderT<float> ae;
  if (rgb_probe) {
    encode = [](const Image& img) { return img; };
    space = "rgb";
  } else {
    if (ae_ckpt.empty())
      throw CLI::ValidationError("--ae", "probe-consistency requires --ae "
                                         "(or --rgb for the identity probe)");
    ae = ae_from_checkpoint(load_checkpoint(ae_ckpt), nullptr);
    encode = ae_encoder_fn(ae);
  }

  json summary;
  double acc = 0;
  std::vector<MetricRow> rows;
  for (size_t s = 0; s < views.size(); ++s) {
    const double v = consistency_probe(encode, views[s], cfg, s);
    rows.push_back({views[s].scene_id, -1, space, v, 0.0});
    acc += v;
    std::printf("scene_%03zu probe: %.3f dB\n", s, v);
  }
  summary["mean_probe_psnr"] = acc / views.size();
  summary["space"] = space;
  write_metric_rows(cfg.out_dir + "/probe.csv", rows);
  std::ofstream rj(cfg.out_dir + "/report.json");
  rj << summary.dump(1);
  std::printf("mean probe: %.3f dB\n", acc / views.size());
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"latent-space neural fields with a 3D-aware autoencoder"};
  app.require_subcommand(1);
  GlobalArgs g;
  app.add_option("--config", g.config_path, "JSON run configuration");
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_flag("--deterministic", g.deterministic,
               "bit-reproducible mode (zeroes wall-clock columns)");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--data", g.data_dir,
                 "dataset directory (default <out-dir>/dataset)");

  auto* gen = app.add_subcommand("gen-data", "generate scenes and images");
  gen->fallthrough();

  auto* pre = app.add_subcommand("pretrain-scenes",
                                 "fit tri-planes to cached latents");
  pre->fallthrough();
  std::string pre_ae;
  pre->add_option("--ae", pre_ae, "autoencoder checkpoint");

  auto* tig = app.add_subcommand("train-igae", "joint 3D-aware AE training");
  tig->fallthrough();
  std::string tig_ae;
  bool no_3d = false, no_pr = false;
  tig->add_option("--ae", tig_ae, "baseline AE checkpoint (else pretrains)");
  tig->add_flag("--no-3d", no_3d, "ablation: drop the 3D objective");
  tig->add_flag("--no-pr", no_pr, "ablation: drop AE preservation");

  auto* tnf = app.add_subcommand("train-nerf", "two-stage latent NeRF");
  tnf->fallthrough();
  std::string tnf_ae, tnf_backend, tnf_stage = "both", tnf_field;
  int tnf_scene = 0;
  tnf->add_option("--ae", tnf_ae, "autoencoder checkpoint (required)");
  tnf->add_option("--backend", tnf_backend, "triplane|mlp");
  tnf->add_option("--stage", tnf_stage, "ls|align|both");
  tnf->add_option("--field", tnf_field, "stage-1 field (for --stage align)");
  tnf->add_option("--scene", tnf_scene, "scene index in the dataset");

  auto* ren = app.add_subcommand("render", "render a checkpointed field");
  ren->fallthrough();
  std::string ren_ckpt, ren_ae, ren_out = "render.png";
  int ren_scene = 0, ren_pose = 0;
  bool ren_latent = false, ren_rgb = false;
  ren->add_option("--ckpt", ren_ckpt, "field checkpoint")->required();
  ren->add_option("--ae", ren_ae, "autoencoder checkpoint (for --rgb)");
  ren->add_option("--scene", ren_scene, "scene index");
  ren->add_option("--pose-index", ren_pose, "pose index in the scene");
  ren->add_flag("--latent", ren_latent, "write the latent image");
  ren->add_flag("--rgb", ren_rgb, "decode to RGB");
  ren->add_option("--out", ren_out, "output PNG path");

  auto* ev = app.add_subcommand("eval", "metrics for any checkpoint");
  ev->fallthrough();
  std::string ev_ckpt, ev_ae;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint to evaluate")->required();
  ev->add_option("--ae", ev_ae, "autoencoder fallback for field decoding");

  auto* be = app.add_subcommand("bench", "render/decode timing");
  be->fallthrough();
  std::string be_ckpt, be_ae;
  int be_repeats = 1000, be_train = 0;
  be->add_option("--ckpt", be_ckpt, "field checkpoint (else fresh field)");
  be->add_option("--ae", be_ae, "autoencoder checkpoint");
  be->add_option("--repeats", be_repeats, "render repetitions");
  be->add_option("--train-steps", be_train,
                 "also time this many training steps per space");

  auto* pc = app.add_subcommand("probe-consistency",
                                "latent 3D-consistency probe");
  pc->fallthrough();
  std::string pc_ae;
  bool pc_rgb = false;
  pc->add_option("--ae", pc_ae, "autoencoder checkpoint");
  pc->add_flag("--rgb", pc_rgb, "probe raw RGB images (identity encoder)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();  // program name
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(g);
    if (pre->parsed()) return cmd_pretrain_scenes(g, pre_ae);
    if (tig->parsed()) return cmd_train_igae(g, tig_ae, no_3d, no_pr);
    if (tnf->parsed())
      return cmd_train_nerf(g, tnf_ae, tnf_backend, tnf_stage, tnf_field,
                            tnf_scene);
    if (ren->parsed())
      return cmd_render(g, ren_ckpt, ren_ae, ren_scene, ren_pose, ren_latent,
                        ren_rgb, ren_out);
    if (ev->parsed()) return cmd_eval(g, ev_ckpt, ev_ae);
    if (be->parsed()) return cmd_bench(g, be_ckpt, be_ae, be_repeats, be_train);
    if (pc->parsed()) return cmd_probe(g, pc_ae, pc_rgb);
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}

int cli_dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cli_dispatch(args);
}

}  // namespace igae
