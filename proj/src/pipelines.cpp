#include "igae/pipelines.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "igae/threading.hpp"

using nlohmann::json;

namespace igae {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void ensure_finite(double loss, int64_t step, const std::string& stage,
                   const std::vector<int>& batch, const RunConfig& cfg) {
  if (std::isfinite(loss)) return;
  json dump;
  dump["stage"] = stage;
  dump["step"] = step;
  dump["loss"] = "non-finite";
  dump["batch_indices"] = batch;
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  std::ofstream out(cfg.out_dir + "/nan_dump.json");
  if (out) out << dump.dump(1);
  throw std::runtime_error("training aborted at step " + std::to_string(step) +
                           " (" + stage + "): non-finite loss; batch dumped to " +
                           cfg.out_dir + "/nan_dump.json");
}

Tensor stack_images(const std::vector<Image>& images,
                    const std::vector<int>& idx) {
  std::vector<Tensor> items;
  items.reserve(idx.size());
  for (int i : idx) items.push_back(image_to_tensor(images[i]));
  return stack_batch(items);
}

std::vector<int> sample_indices(const std::vector<int>& pool, int count,
                                Rng& rng) {
  std::vector<int> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i)
    out.push_back(pool[rng.next_below(pool.size())]);
  return out;
}

Image latent_image_of(const Tensor& t) {
  const Shape& s = t.shape();
  Image img(s[0], s[1], s[2]);
  img.data = t.data();
  return img;
}

}  // namespace

// ---------------------------------------------------------------------------
// bundles
// ---------------------------------------------------------------------------

ParamList<float> LatentSceneSet::params() const {
  ParamList<float> out;
  char name[48];
  for (size_t s = 0; s < triplanes.size(); ++s) {
    std::snprintf(name, sizeof name, "triplane.s%03zu", s);
    triplanes[s].collect_params(name, out);
  }
  decoder.collect_params("feature_decoder", out);
  out.push_back({"background.beta", beta});
  return out;
}

ParamList<float> SceneField::params() const {
  ParamList<float> out;
  if (backend == "triplane") {
    triplane.collect_params("triplane", out);
    fdec.collect_params("feature_decoder", out);
  } else {
    mlp.collect_params("mlp_field", out);
  }
  out.push_back({"background.beta", beta});
  return out;
}

Tensor latent_background_init(const AutoencoderT<float>& ae, int extent) {
  auto white = Tensor::filled({1, 3, extent, extent}, 1.f);
  auto z = ae.encode(white);
  const Shape& s = z.shape();
  const size_t plane = static_cast<size_t>(s[2]) * s[3];
  std::vector<float> beta(s[1]);
  for (int c = 0; c < s[1]; ++c) {
    double acc = 0;
    for (size_t i = 0; i < plane; ++i) acc += z.data()[c * plane + i];
    beta[c] = static_cast<float>(acc / plane);
  }
  return Tensor::from_data({s[1]}, std::move(beta), /*requires_grad=*/true);
}

LatentSceneSet make_latent_scene_set(int scenes, const RunConfig& cfg,
                                     const AutoencoderT<float>& ae, Rng& rng) {
  LatentSceneSet set;
  const double bounds = cfg.field.bounds_scale;  // scene radius is 1
  for (int s = 0; s < scenes; ++s)
    set.triplanes.push_back(TriPlaneT<float>::make(
        cfg.field.plane_resolution, cfg.field.plane_features, bounds, rng));
  set.decoder = FeatureDecoderT<float>::make(cfg.field.plane_features,
                                             cfg.ae.channels,
                                             ChannelKind::latent, rng);
  set.beta = latent_background_init(ae, cfg.dataset.extent);
  return set;
}

SceneField make_scene_field(const RunConfig& cfg, double scene_radius,
                            const AutoencoderT<float>& ae, int extent,
                            Rng& rng) {
  SceneField f;
  f.backend = cfg.field.backend;
  const double bounds = scene_radius * cfg.field.bounds_scale;
  if (f.backend == "triplane") {
    f.triplane = TriPlaneT<float>::make(cfg.field.plane_resolution,
                                        cfg.field.plane_features, bounds, rng);
    f.fdec = FeatureDecoderT<float>::make(cfg.field.plane_features,
                                          cfg.ae.channels, ChannelKind::latent,
                                          rng);
  } else {
    f.mlp = MlpFieldT<float>::make(cfg.field.mlp_pe, cfg.ae.channels,
                                   ChannelKind::latent, bounds, rng);
  }
  f.beta = latent_background_init(ae, extent);
  return f;
}

// ---------------------------------------------------------------------------
// reporting
// ---------------------------------------------------------------------------

void RunReport::append(MetricsRow row) {
  if (deterministic) row.wall_ms = 0;
  rows.push_back(std::move(row));
}

void RunReport::extend(const RunReport& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
  for (const auto& [k, v] : other.summary.items()) summary[k] = v;
}

void RunReport::write(const std::string& out_dir) const {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir + "/metrics.csv");
  if (!csv) throw std::runtime_error("cannot write " + out_dir + "/metrics.csv");
  csv << "step,stage,loss,latent_psnr,rgb_psnr,ssim,lr,wall_ms\n";
  char buf[256];
  auto opt = [](const std::optional<double>& v) {
    if (!v) return std::string();
    char b[40];
    std::snprintf(b, sizeof b, "%.9g", *v);
    return std::string(b);
  };
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%lld,%s,%.9g,%s,%s,%s,%.9g,%.9g\n",
                  static_cast<long long>(r.step), r.stage.c_str(), r.loss,
                  opt(r.latent_psnr).c_str(), opt(r.rgb_psnr).c_str(),
                  opt(r.ssim).c_str(), r.lr, r.wall_ms);
    csv << buf;
  }
  std::ofstream rj(out_dir + "/report.json");
  if (!rj) throw std::runtime_error("cannot write " + out_dir + "/report.json");
  rj << summary.dump(1);
}

// ---------------------------------------------------------------------------
// baseline autoencoder training
// ---------------------------------------------------------------------------

RunReport train_autoencoder(AutoencoderT<float>& ae, const RealImageSet& real,
                            const PerceptualProxyT<float>& proxy,
                            const RunConfig& cfg, Rng& rng,
                            const std::vector<PosedViewSet>* scene_views) {
  RunReport rep;
  rep.deterministic = cfg.deterministic;
  std::vector<int> train_idx, held_idx;
  for (size_t i = 0; i < real.images.size(); ++i)
    (i % 8 == 0 ? held_idx : train_idx).push_back(static_cast<int>(i));
  if (train_idx.empty())
    throw std::invalid_argument("train_autoencoder: empty training set");

  // flat list of train-view images across the scene sets
  std::vector<const Image*> view_pool;
  if (scene_views)
    for (const auto& vs : *scene_views)
      for (int v : vs.train_indices()) view_pool.push_back(&vs.images[v]);

  AdamT<float> opt_enc(ae.encoder_params());
  AdamT<float> opt_dec(ae.decoder_params());
  const int batch = cfg.train.batch_views;
  Schedule sched{cfg.optim.lr_ae_pretrain, 1.0, cfg.optim.decay,
                 std::max<int>(1, static_cast<int>(train_idx.size()) / batch),
                 0};

  auto heldout_psnr = [&] {
    double acc = 0;
    for (int i : held_idx) {
      auto x = reshape(image_to_tensor(real.images[i]),
                       {1, 3, real.images[i].height, real.images[i].width});
      auto recon = ae.decode(ae.encode(x));
      acc += psnr(real.images[i], tensor_to_image(slice_batch_item(recon, 0)));
    }
    return held_idx.empty() ? 0.0 : acc / held_idx.size();
  };

  for (int step = 0; step < cfg.train.ae_pretrain_steps; ++step) {
    const auto t0 = Clock::now();
    std::vector<int> idx;
    std::vector<Tensor> items;
    for (int bi = 0; bi < batch; ++bi) {
      const bool from_views =
          !view_pool.empty() && rng.uniform() < 0.5;
      if (from_views) {
        const int v = static_cast<int>(rng.next_below(view_pool.size()));
        idx.push_back(-1 - v);
        items.push_back(image_to_tensor(*view_pool[v]));
      } else {
        const int i = train_idx[rng.next_below(train_idx.size())];
        idx.push_back(i);
        items.push_back(image_to_tensor(real.images[i]));
      }
    }
    auto x = stack_batch(items);
    opt_enc.zero_grad();
    opt_dec.zero_grad();
    auto k = ae.encode(x);
    auto recon = ae.decode(k);
    auto loss = loss_ae_real(proxy, x, recon, k, cfg.train.weights);
    ensure_finite(loss.item(), step, "ae_pretrain", idx, cfg);
    loss.backward();
    const double lr = sched.rate(step);
    opt_enc.step(lr);
    opt_dec.step(lr);

    MetricsRow row{step, "ae_pretrain", loss.item(), lr, ms_since(t0),
                   std::nullopt, std::nullopt, std::nullopt};
    if ((step + 1) % cfg.train.eval_interval == 0 ||
        step + 1 == cfg.train.ae_pretrain_steps)
      row.rgb_psnr = heldout_psnr();
    rep.append(std::move(row));
  }
  rep.summary["ae_heldout_psnr"] = heldout_psnr();
  return rep;
}

// ---------------------------------------------------------------------------
// tri-plane pretraining on cached latents
// ---------------------------------------------------------------------------

RunReport pretrain_latent_scenes(const AutoencoderT<float>& ae,
                                 LatentSceneSet& scenes,
                                 const std::vector<PosedViewSet>& views,
                                 const std::vector<LatentCache>& caches,
                                 const RunConfig& cfg, Rng& rng) {
  if (views.size() != caches.size() ||
      views.size() != scenes.triplanes.size())
    throw std::invalid_argument("pretrain_latent_scenes: set sizes differ");
  const uint64_t fp = encoder_fingerprint(ae);
  for (const auto& c : caches)
    if (c.fingerprint != fp)
      throw std::runtime_error(
          "pretrain_latent_scenes: stale latent cache (encoder fingerprint "
          "mismatch); rebuild the cache");

  RunReport rep;
  rep.deterministic = cfg.deterministic;
  struct Pair {
    int scene, entry;
  };
  std::vector<Pair> pairs;
  for (size_t s = 0; s < caches.size(); ++s)
    for (size_t e = 0; e < caches[s].latents.size(); ++e)
      pairs.push_back({static_cast<int>(s), static_cast<int>(e)});

  AdamT<float> opt(scenes.params());
  const int batch = cfg.train.batch_views;
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>(pairs.size()) / batch);
  Schedule sched{cfg.optim.lr_triplane, 1.0, cfg.optim.decay, steps_per_epoch,
                 0};
  const int h = caches[0].h, w = caches[0].w, c = caches[0].c;

  int64_t step = 0;
  for (int epoch = 0; epoch < cfg.train.pretrain_epochs; ++epoch) {
    // deterministic shuffle
    std::vector<int> order(pairs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_below(i)]);

    for (size_t off = 0; off + batch <= order.size(); off += batch) {
      const auto t0 = Clock::now();
      opt.zero_grad();
      Tensor loss = Tensor::scalar(0.f);
      std::vector<int> batch_ids;
      std::vector<int> uniq_scenes;
      for (int bi = 0; bi < batch; ++bi) {
        const Pair& pr = pairs[order[off + bi]];
        batch_ids.push_back(order[off + bi]);
        const auto& vs = views[pr.scene];
        const auto& cache = caches[pr.scene];
        const auto [near, far] = vs.near_far();
        auto render = render_image(scenes.scene_fn(pr.scene),
                                   vs.poses[cache.pose_index[pr.entry]], h, w,
                                   cfg.field.samples_train,
                                   BackgroundModelT<float>::latent(scenes.beta),
                                   rng, /*jitter=*/true, near, far);
        auto target = Tensor::from_data({c, h, w}, cache.latents[pr.entry]);
        loss = add(loss, mse(render.values, target));
        if (std::find(uniq_scenes.begin(), uniq_scenes.end(), pr.scene) ==
            uniq_scenes.end())
          uniq_scenes.push_back(pr.scene);
      }
      for (int s : uniq_scenes)
        loss = add(loss, scale(tv_triplane(scenes.triplanes[s]),
                               static_cast<float>(cfg.train.weights.tv3d)));
      ensure_finite(loss.item(), step, "triplane_pretrain", batch_ids, cfg);
      loss.backward();
      const double lr = sched.rate(step);
      opt.step(lr);

      MetricsRow row{step, "triplane_pretrain", loss.item(), lr, ms_since(t0),
                     std::nullopt, std::nullopt, std::nullopt};
      if ((step + 1) % cfg.train.eval_interval == 0)
        row.latent_psnr = [&] {
          // quick train-view agreement on scene 0
          const auto& cache = caches[0];
          const auto& vs = views[0];
          const auto [near, far] = vs.near_far();
          Rng eval_rng(0);
          auto render = render_image(
              scenes.scene_fn(0), vs.poses[cache.pose_index[0]], h, w,
              cfg.field.samples_eval,
              BackgroundModelT<float>::latent(scenes.beta), eval_rng, false,
              near, far);
          std::vector<Image> set{latent_image_of(
              Tensor::from_data({c, h, w}, cache.latents[0]))};
          return psnr_normalized(latent_image_of(render.values), set[0],
                                 per_channel_std(set));
        }();
      rep.append(std::move(row));
      ++step;
    }
  }

  // train-view latent agreement, averaged over every cache entry
  double acc = 0;
  int count = 0;
  for (size_t s = 0; s < caches.size(); ++s) {
    const auto& vs = views[s];
    const auto& cache = caches[s];
    const auto [near, far] = vs.near_far();
    std::vector<Image> refs;
    for (const auto& lat : cache.latents)
      refs.push_back(latent_image_of(Tensor::from_data({c, h, w}, lat)));
    const auto stds = per_channel_std(refs);
    for (size_t e = 0; e < cache.latents.size(); ++e) {
      Rng eval_rng(0);
      auto render = render_image(scenes.scene_fn(static_cast<int>(s)),
                                 vs.poses[cache.pose_index[e]], h, w,
                                 cfg.field.samples_eval,
                                 BackgroundModelT<float>::latent(scenes.beta),
                                 eval_rng, false, near, far);
      acc += psnr_normalized(latent_image_of(render.values), refs[e], stds);
      ++count;
    }
  }
  rep.summary["pretrain_train_latent_psnr"] = count ? acc / count : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------
// IG-AE joint training
// ---------------------------------------------------------------------------

RunReport train_igae_joint(AutoencoderT<float>& ae, LatentSceneSet& scenes,
                           const std::vector<PosedViewSet>& views,
                           const RealImageSet& real,
                           const PerceptualProxyT<float>& proxy,
                           const RunConfig& cfg, Rng& rng) {
  if (views.size() != scenes.triplanes.size())
    throw std::invalid_argument("train_igae_joint: scene count mismatch");
  RunReport rep;
  rep.deterministic = cfg.deterministic;

  struct Pair {
    int scene, view;
  };
  std::vector<Pair> pairs;
  for (size_t s = 0; s < views.size(); ++s)
    for (int v : views[s].train_indices())
      pairs.push_back({static_cast<int>(s), v});

  std::vector<int> real_train, real_held;
  for (size_t i = 0; i < real.images.size(); ++i)
    (i % 8 == 0 ? real_held : real_train).push_back(static_cast<int>(i));

  AdamT<float> opt_enc(ae.encoder_params());
  AdamT<float> opt_dec(ae.decoder_params());
  AdamT<float> opt_scenes(scenes.params());

  const int batch = cfg.train.batch_views;
  const int steps_per_epoch =
      std::max<int>(1, static_cast<int>(pairs.size()) / batch);
  Schedule s_enc{cfg.optim.lr_encoder, 1.0, cfg.optim.decay, steps_per_epoch, 0};
  Schedule s_dec{cfg.optim.lr_decoder, 1.0, cfg.optim.decay, steps_per_epoch, 0};
  Schedule s_tp{cfg.optim.lr_triplane, 1.0, cfg.optim.decay, steps_per_epoch, 0};

  const int l = ae.spec.downscale;
  const int H = cfg.dataset.extent;
  const int h = H / l;
  const int c = ae.spec.channels;
  const float m3d = cfg.train.no_3d ? 0.f : 1.f;
  const float mpr = cfg.train.no_pr ? 0.f : 1.f;

  auto heldout_real_psnr = [&] {
    if (real_held.empty()) return 0.0;
    double acc = 0;
    for (int i : real_held) {
      auto x = reshape(image_to_tensor(real.images[i]), {1, 3, H, H});
      auto recon = ae.decode(ae.encode(x));
      acc += psnr(real.images[i], tensor_to_image(slice_batch_item(recon, 0)));
    }
    return acc / real_held.size();
  };

  // render-vs-encode agreement on held-out scene views
  auto heldout_latent_psnr = [&] {
    double acc = 0;
    int count = 0;
    for (size_t s = 0; s < views.size(); ++s) {
      const auto& vs = views[s];
      const auto held = vs.heldout_indices();
      if (held.empty()) continue;
      const int v = held[0];
      const auto [near, far] = vs.near_far();
      Rng eval_rng(0);
      auto render = render_image(scenes.scene_fn(static_cast<int>(s)),
                                 vs.poses[v], h, h, cfg.field.samples_eval,
                                 BackgroundModelT<float>::latent(scenes.beta),
                                 eval_rng, false, near, far);
      auto z = ae.encode(reshape(image_to_tensor(vs.images[v]), {1, 3, H, H}));
      std::vector<Image> ref{latent_image_of(slice_batch_item(z, 0))};
      acc += psnr_normalized(latent_image_of(render.values), ref[0],
                             per_channel_std(ref));
      ++count;
    }
    return count ? acc / count : 0.0;
  };

  const int64_t total_steps =
      static_cast<int64_t>(cfg.train.joint_epochs) * steps_per_epoch;
  for (int64_t step = 0; step < total_steps; ++step) {
    const auto t0 = Clock::now();
    std::vector<int> pair_ids;
    for (int bi = 0; bi < batch; ++bi)
      pair_ids.push_back(static_cast<int>(rng.next_below(pairs.size())));
    const auto real_ids = sample_indices(real_train, cfg.train.batch_real, rng);

    opt_enc.zero_grad();
    opt_dec.zero_grad();
    opt_scenes.zero_grad();

    // scene-view branch
    std::vector<Tensor> gt_items;
    std::vector<Tensor> renders;
    std::vector<int> uniq_scenes;
    for (int id : pair_ids) {
      const Pair& pr = pairs[id];
      const auto& vs = views[pr.scene];
      const auto [near, far] = vs.near_far();
      gt_items.push_back(image_to_tensor(vs.images[pr.view]));
      auto render = render_image(scenes.scene_fn(pr.scene),
                                 vs.poses[pr.view], h, h,
                                 cfg.field.samples_train,
                                 BackgroundModelT<float>::latent(scenes.beta),
                                 rng, /*jitter=*/true, near, far);
      renders.push_back(render.values);
      if (std::find(uniq_scenes.begin(), uniq_scenes.end(), pr.scene) ==
          uniq_scenes.end())
        uniq_scenes.push_back(pr.scene);
    }
    auto x = stack_batch(gt_items);              // [B,3,H,H]
    auto z = ae.encode(x);                       // [B,c,h,h]
    auto zr = stack_batch(renders);              // [B,c,h,h]
    auto xr = ae.decode(zr);                     // decoded renders
    auto xhat = ae.decode(z);                    // reconstructions

    Tensor l3d = Tensor::scalar(0.f);
    Tensor lae = Tensor::scalar(0.f);
    const auto& w = cfg.train.weights;
    for (int bi = 0; bi < batch; ++bi) {
      l3d = add(l3d, scale(mse(slice_batch_item(z, bi),
                               slice_batch_item(zr, bi)),
                           static_cast<float>(w.latent)));
      l3d = add(l3d, scale(mse(slice_batch_item(x, bi),
                               slice_batch_item(xr, bi)),
                           static_cast<float>(w.rgb)));
      lae = add(lae, scale(mse(slice_batch_item(x, bi),
                               slice_batch_item(xhat, bi)),
                           static_cast<float>(w.ae_synth)));
    }
    for (int s : uniq_scenes)
      l3d = add(l3d, scale(tv_triplane(scenes.triplanes[s]),
                           static_cast<float>(w.tv3d)));

    // real branch
    auto xi = stack_images(real.images, real_ids);
    auto k = ae.encode(xi);
    auto ri = ae.decode(k);
    lae = add(lae, scale(loss_ae_real(proxy, xi, ri, k, w),
                         static_cast<float>(w.ae_real)));

    auto total = add(scale(l3d, m3d), scale(lae, mpr));
    ensure_finite(total.item(), step, "igae_joint", pair_ids, cfg);
    total.backward();
    opt_enc.step(s_enc.rate(step));
    opt_dec.step(s_dec.rate(step));
    opt_scenes.step(s_tp.rate(step));

    MetricsRow row{step, "igae_joint", total.item(), s_enc.rate(step),
                   ms_since(t0), std::nullopt, std::nullopt, std::nullopt};
    if ((step + 1) % cfg.train.eval_interval == 0 || step + 1 == total_steps) {
      row.rgb_psnr = heldout_real_psnr();
      row.latent_psnr = heldout_latent_psnr();
    }
    rep.append(std::move(row));
  }

  rep.summary["igae_heldout_real_psnr"] = heldout_real_psnr();
  rep.summary["igae_heldout_latent_psnr"] = heldout_latent_psnr();
  rep.summary["rng_counter"] = rng.counter();
  return rep;
}

// ---------------------------------------------------------------------------
// two-stage latent NeRF training
// ---------------------------------------------------------------------------

namespace {

struct HeldoutEval {
  double latent_psnr = 0;
  double rgb_psnr = 0;
  double ssim_v = 0;
};

HeldoutEval eval_heldout(const AutoencoderT<float>& ae,
                         const AutoencoderT<float>& decoder_ae,
                         const SceneField& field, const PosedViewSet& views,
                         const RunConfig& cfg) {
  const auto held = views.heldout_indices();
  const int l = ae.spec.downscale;
  const int h = views.height / l, w = views.width / l;
  const auto [near, far] = views.near_far();
  const auto fn = field.fn();

  std::vector<Image> encoded;
  for (int v : held) {
    auto z = ae.encode(reshape(image_to_tensor(views.images[v]),
                               {1, 3, views.height, views.width}));
    encoded.push_back(latent_image_of(slice_batch_item(z, 0)));
  }
  const auto stds = per_channel_std(encoded);

  HeldoutEval out;
  std::vector<double> lat(held.size()), rgb(held.size()), sv(held.size());
  parallel_for(
      static_cast<int>(held.size()),
      [&](int i) {
        const int v = held[i];
        Rng eval_rng(0);
        auto render = render_image(fn, views.poses[v], h, w,
                                   cfg.field.samples_eval,
                                   BackgroundModelT<float>::latent(field.beta),
                                   eval_rng, false, near, far);
        lat[i] = psnr_normalized(latent_image_of(render.values), encoded[i],
                                 stds);
        auto decoded = decoder_ae.decode(
            reshape(render.values, {1, field.beta.shape()[0], h, w}));
        const Image dec_img = tensor_to_image(slice_batch_item(decoded, 0));
        rgb[i] = psnr(views.images[v], dec_img);
        sv[i] = ssim(views.images[v], dec_img);
      },
      cfg.deterministic);
  for (size_t i = 0; i < held.size(); ++i) {
    out.latent_psnr += lat[i];
    out.rgb_psnr += rgb[i];
    out.ssim_v += sv[i];
  }
  const double n = std::max<size_t>(1, held.size());
  out.latent_psnr /= n;
  out.rgb_psnr /= n;
  out.ssim_v /= n;
  return out;
}

}  // namespace

LatentNerfResult train_latent_nerf(const AutoencoderT<float>& ae,
                                   const PosedViewSet& views,
                                   const LatentCache& cache, NerfStage stage,
                                   const RunConfig& cfg,
                                   const SceneField* resume) {
  if (views.height % ae.spec.downscale != 0 ||
      views.width % ae.spec.downscale != 0)
    throw std::invalid_argument("train_latent_nerf: extent " +
                                std::to_string(views.height) + "x" +
                                std::to_string(views.width) +
                                " not divisible by l=" +
                                std::to_string(ae.spec.downscale));
  const uint64_t fp = encoder_fingerprint(ae);
  if (stage != NerfStage::align && cache.fingerprint != fp)
    throw std::runtime_error(
        "train_latent_nerf: stale latent cache (encoder fingerprint "
        "mismatch); rebuild the cache");

  LatentNerfResult result;
  result.report.deterministic = cfg.deterministic;
  const int h = cache.h, w = cache.w, c = cache.c;
  const auto [near, far] = views.near_far();
  const int batch = cfg.train.batch_views;
  const int entries = static_cast<int>(cache.latents.size());
  const int steps_per_epoch = std::max(1, entries / batch);

  Rng init_rng(Rng(cfg.seed).derive("nerf-init").next_u64());
  result.field = resume ? *resume
                        : make_scene_field(cfg, views.scene_radius, ae,
                                           views.height, init_rng);
  SceneField& field = result.field;
  result.tuned_ae = ae;  // decoder copy only materializes in stage 2

  // -------------------------------------------------------- latent supervision
  if (stage == NerfStage::ls || stage == NerfStage::both) {
    Rng rng(Rng(cfg.seed).derive("nerf-ls").next_u64());
    AdamT<float> opt(field.params());
    Schedule sched{cfg.optim.lr_field, cfg.optim.xi_ls, cfg.optim.decay,
                   steps_per_epoch, 0};
    const bool plane_tv =
        field.backend == "triplane" && cfg.train.ls_plane_tv;
    const auto fn = field.fn();
    for (int step = 0; step < cfg.train.ls_iters; ++step) {
      const auto t0 = Clock::now();
      opt.zero_grad();
      Tensor loss = Tensor::scalar(0.f);
      std::vector<int> ids;
      for (int bi = 0; bi < batch; ++bi)
        ids.push_back(static_cast<int>(rng.next_below(entries)));
      for (int e : ids) {
        auto render = render_image(fn, views.poses[cache.pose_index[e]], h, w,
                                   cfg.field.samples_train,
                                   BackgroundModelT<float>::latent(field.beta),
                                   rng, true, near, far);
        loss = add(loss, mse(render.values,
                             Tensor::from_data({c, h, w}, cache.latents[e])));
      }
      if (plane_tv)
        loss = add(loss, scale(tv_triplane(field.triplane),
                               static_cast<float>(cfg.train.weights.tv3d)));
      ensure_finite(loss.item(), step, "latent_supervision", ids, cfg);
      loss.backward();
      opt.step(sched.rate(step));

      MetricsRow row{step, "latent_supervision", loss.item(),
                     sched.rate(step), ms_since(t0), std::nullopt,
                     std::nullopt, std::nullopt};
      if ((step + 1) % cfg.train.eval_interval == 0 ||
          step + 1 == cfg.train.ls_iters) {
        const auto ev = eval_heldout(ae, result.tuned_ae, field, views, cfg);
        row.latent_psnr = ev.latent_psnr;
        row.rgb_psnr = ev.rgb_psnr;
        row.ssim = ev.ssim_v;
      }
      result.report.append(std::move(row));
    }
  }

  // ------------------------------------------------------------ rgb alignment
  if (stage == NerfStage::align || stage == NerfStage::both) {
    if (stage == NerfStage::align && !resume)
      throw std::invalid_argument(
          "train_latent_nerf: align stage requires the stage-1 field");
    Rng rng(Rng(cfg.seed).derive("nerf-align").next_u64());
    result.tuned_ae = ae.clone_decoder_into(/*trainable=*/true);
    AdamT<float> opt_field(field.params());
    AdamT<float> opt_dec(result.tuned_ae.decoder_params());
    // schedules continue across the stage boundary: only xi switches
    Schedule s_field{cfg.optim.lr_field, cfg.optim.xi_align, cfg.optim.decay,
                     steps_per_epoch, cfg.train.ls_iters / steps_per_epoch};
    Schedule s_dec{cfg.optim.lr_decoder_align, 1.0,
                   cfg.optim.decoder_align_decay, 1, 0};
    const auto train_idx = views.train_indices();
    const auto fn = field.fn();
    for (int step = 0; step < cfg.train.align_iters; ++step) {
      const auto t0 = Clock::now();
      opt_field.zero_grad();
      opt_dec.zero_grad();
      std::vector<int> ids = sample_indices(train_idx, batch, rng);
      std::vector<Tensor> renders, gts;
      for (int v : ids) {
        auto render = render_image(fn, views.poses[v], h, w,
                                   cfg.field.samples_train,
                                   BackgroundModelT<float>::latent(field.beta),
                                   rng, true, near, far);
        renders.push_back(render.values);
        gts.push_back(image_to_tensor(views.images[v]));
      }
      auto decoded = result.tuned_ae.decode(stack_batch(renders));
      Tensor loss = Tensor::scalar(0.f);
      for (int bi = 0; bi < batch; ++bi)
        loss = add(loss, mse(gts[bi], slice_batch_item(decoded, bi)));
      ensure_finite(loss.item(), step, "rgb_alignment", ids, cfg);
      loss.backward();
      opt_field.step(s_field.rate(step));
      opt_dec.step(s_dec.rate(step));

      MetricsRow row{cfg.train.ls_iters + step, "rgb_alignment", loss.item(),
                     s_field.rate(step), ms_since(t0), std::nullopt,
                     std::nullopt, std::nullopt};
      if ((step + 1) % cfg.train.eval_interval == 0 ||
          step + 1 == cfg.train.align_iters) {
        const auto ev = eval_heldout(ae, result.tuned_ae, field, views, cfg);
        row.latent_psnr = ev.latent_psnr;
        row.rgb_psnr = ev.rgb_psnr;
        row.ssim = ev.ssim_v;
      }
      result.report.append(std::move(row));
    }
  }

  const auto final_eval = eval_heldout(ae, result.tuned_ae, field, views, cfg);
  result.heldout_latent_psnr = final_eval.latent_psnr;
  result.heldout_rgb_psnr = final_eval.rgb_psnr;
  result.heldout_ssim = final_eval.ssim_v;
  result.report.summary["heldout_latent_psnr"] = final_eval.latent_psnr;
  result.report.summary["heldout_rgb_psnr"] = final_eval.rgb_psnr;
  result.report.summary["heldout_ssim"] = final_eval.ssim_v;
  return result;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

std::vector<MetricRow> latent_nvs_eval(const AutoencoderT<float>& ae,
                                       const SceneField& field,
                                       const PosedViewSet& views,
                                       const RunConfig& cfg) {
  const auto held = views.heldout_indices();
  const int l = ae.spec.downscale;
  const int h = views.height / l, w = views.width / l;
  const auto [near, far] = views.near_far();
  const auto fn = field.fn();

  std::vector<Image> encoded;
  for (int v : held) {
    auto z = ae.encode(reshape(image_to_tensor(views.images[v]),
                               {1, 3, views.height, views.width}));
    encoded.push_back(latent_image_of(slice_batch_item(z, 0)));
  }
  const auto stds = per_channel_std(encoded);

  std::vector<MetricRow> rows(held.size());
  parallel_for(
      static_cast<int>(held.size()),
      [&](int i) {
        Rng eval_rng(0);
        auto render = render_image(fn, views.poses[held[i]], h, w,
                                   cfg.field.samples_eval,
                                   BackgroundModelT<float>::latent(field.beta),
                                   eval_rng, false, near, far);
        const Image rendered = latent_image_of(render.values);
        rows[i] = MetricRow{views.scene_id, held[i], "latent",
                            psnr_normalized(rendered, encoded[i], stds),
                            ssim(rendered, encoded[i])};
      },
      cfg.deterministic);
  return rows;
}

std::function<Image(const Image&)> ae_encoder_fn(
    const AutoencoderT<float>& ae) {
  return [&ae](const Image& img) {
    auto z = ae.encode(reshape(image_to_tensor(img),
                               {1, 3, img.height, img.width}));
    const Shape& s = z.shape();
    Image out(s[1], s[2], s[3]);
    out.data = z.data();
    return out;
  };
}

double consistency_probe(const std::function<Image(const Image&)>& encode,
                         const PosedViewSet& views, const RunConfig& cfg,
                         uint64_t salt) {
  const auto train_idx = views.train_indices();
  const auto held_idx = views.heldout_indices();
  if (train_idx.empty() || held_idx.empty())
    throw std::invalid_argument("consistency_probe: needs both splits");

  std::vector<Image> train_lat, held_lat;
  for (int v : train_idx) train_lat.push_back(encode(views.images[v]));
  for (int v : held_idx) held_lat.push_back(encode(views.images[v]));
  const int h = train_lat[0].height, w = train_lat[0].width,
            c = train_lat[0].channels;

  Rng rng(Rng(cfg.seed).derive("probe").derive(salt).next_u64());
  const double bounds = views.scene_radius * cfg.field.bounds_scale;
  auto tp = TriPlaneT<float>::make(cfg.field.plane_resolution,
                                   cfg.field.plane_features, bounds, rng);
  auto dec = FeatureDecoderT<float>::make(cfg.field.plane_features, c,
                                          ChannelKind::latent, rng);
  // background initialized to the mean encoded white image
  Image white(3, views.height, views.width, 1.f);
  const Image white_lat = encode(white);
  std::vector<float> beta_init(c);
  const size_t plane = static_cast<size_t>(white_lat.height) * white_lat.width;
  for (int ch = 0; ch < c; ++ch) {
    double acc = 0;
    for (size_t i = 0; i < plane; ++i) acc += white_lat.data[ch * plane + i];
    beta_init[ch] = static_cast<float>(acc / plane);
  }
  auto beta = Tensor::from_data({c}, std::move(beta_init), true);

  ParamList<float> params;
  tp.collect_params("triplane", params);
  dec.collect_params("feature_decoder", params);
  params.push_back({"background.beta", beta});
  AdamT<float> opt(params);
  const int batch = cfg.train.batch_views;
  Schedule sched{cfg.optim.lr_triplane, 1.0, cfg.optim.decay,
                 std::max<int>(1, static_cast<int>(train_idx.size()) / batch),
                 0};
  const auto [near, far] = views.near_far();
  const auto fn = field_fn(tp, dec);

  for (int step = 0; step < cfg.train.probe_iters; ++step) {
    opt.zero_grad();
    Tensor loss = Tensor::scalar(0.f);
    std::vector<int> ids;
    for (int bi = 0; bi < batch; ++bi)
      ids.push_back(static_cast<int>(rng.next_below(train_idx.size())));
    for (int i : ids) {
      auto render = render_image(fn, views.poses[train_idx[i]], h, w,
                                 cfg.field.samples_train,
                                 BackgroundModelT<float>::latent(beta), rng,
                                 true, near, far);
      loss = add(loss, mse(render.values,
                           image_to_tensor(train_lat[i])));
    }
    loss = add(loss, scale(tv_triplane(tp),
                           static_cast<float>(cfg.train.weights.tv3d)));
    ensure_finite(loss.item(), step, "consistency_probe", ids, cfg);
    loss.backward();
    opt.step(sched.rate(step));
  }

  const auto stds = per_channel_std(held_lat);
  double acc = 0;
  for (size_t i = 0; i < held_idx.size(); ++i) {
    Rng eval_rng(0);
    auto render = render_image(fn, views.poses[held_idx[i]], h, w,
                               cfg.field.samples_eval,
                               BackgroundModelT<float>::latent(beta), eval_rng,
                               false, near, far);
    acc += psnr_normalized(latent_image_of(render.values), held_lat[i], stds);
  }
  return acc / held_idx.size();
}

// ---------------------------------------------------------------------------
// timing bench
// ---------------------------------------------------------------------------

BenchRow bench_render(const SceneField& field, const AutoencoderT<float>* ae,
                      const std::vector<CameraPose>& poses, int repeats,
                      const RunConfig& cfg, double scene_radius,
                      double camera_distance, int latent_extent) {
  const auto [near, far] = near_far_for_sphere(camera_distance, scene_radius);
  const auto fn = field.fn();
  const int h = latent_extent;
  double render_ms = 0, decode_ms = 0;
  for (int r = 0; r < repeats; ++r) {
    const auto& pose = poses[r % poses.size()];
    Rng rng(0);
    const auto t0 = Clock::now();
    auto render = render_image(fn, pose, h, h, cfg.field.samples_eval,
                               BackgroundModelT<float>::latent(field.beta),
                               rng, false, near, far);
    render_ms += ms_since(t0);
    if (ae) {
      const auto t1 = Clock::now();
      auto decoded = ae->decode(
          reshape(render.values, {1, field.beta.shape()[0], h, h}));
      (void)decoded;
      decode_ms += ms_since(t1);
    }
  }
  BenchRow row;
  row.backend = field.backend;
  row.space = "latent";
  row.mean_render_ms = render_ms / repeats;
  row.mean_decode_ms = ae ? decode_ms / repeats : 0.0;
  row.pixels_touched = static_cast<int64_t>(h) * h;
  return row;
}

BenchRow bench_render_rgb(const TriPlaneT<float>& tp,
                          const FeatureDecoderT<float>& dec,
                          const std::vector<CameraPose>& poses, int repeats,
                          const RunConfig& cfg, double scene_radius,
                          double camera_distance, int extent) {
  const auto [near, far] = near_far_for_sphere(camera_distance, scene_radius);
  const auto fn = field_fn(tp, dec);
  double render_ms = 0;
  for (int r = 0; r < repeats; ++r) {
    const auto& pose = poses[r % poses.size()];
    Rng rng(0);
    const auto t0 = Clock::now();
    auto render = render_image(fn, pose, extent, extent,
                               cfg.field.samples_eval,
                               BackgroundModelT<float>::white_rgb(), rng,
                               false, near, far);
    render_ms += ms_since(t0);
  }
  BenchRow row;
  row.backend = "triplane";
  row.space = "rgb";
  row.mean_render_ms = render_ms / repeats;
  row.mean_decode_ms = 0.0;
  row.pixels_touched = static_cast<int64_t>(extent) * extent;
  return row;
}

// ---------------------------------------------------------------------------
// checkpoint bridges
// ---------------------------------------------------------------------------

Checkpoint make_ae_checkpoint(const AutoencoderT<float>& ae,
                              const Tensor* beta) {
  Checkpoint ckpt;
  ckpt.add_params(ae.encoder_params(), "encoder");
  ckpt.add_params(ae.decoder_params(), "decoder");
  if (beta)
    ckpt.add("background.beta", "background", beta->shape(), beta->data());
  ckpt.meta["kind"] = "ae";
  ckpt.meta["ae"] = {{"downscale", ae.spec.downscale},
                     {"channels", ae.spec.channels},
                     {"schedule", ae.spec.schedule}};
  return ckpt;
}

AutoencoderT<float> ae_from_checkpoint(const Checkpoint& ckpt,
                                       Tensor* beta_out) {
  if (!ckpt.meta.contains("ae"))
    throw CheckpointError("checkpoint has no autoencoder metadata");
  AutoencoderSpec spec;
  spec.downscale = ckpt.meta["ae"].at("downscale").get<int>();
  spec.channels = ckpt.meta["ae"].at("channels").get<int>();
  spec.schedule = ckpt.meta["ae"].at("schedule").get<std::vector<int>>();
  Rng rng(0);
  auto ae = AutoencoderT<float>::make(spec, rng);
  ckpt.restore_params(ae.encoder_params());
  ckpt.restore_params(ae.decoder_params());
  if (beta_out) {
    const CheckpointEntry* e = ckpt.find("background.beta");
    if (e)
      *beta_out = Tensor::from_data(e->shape, e->data, /*requires_grad=*/true);
  }
  return ae;
}

Checkpoint make_field_checkpoint(const SceneField& field,
                                 double scene_radius) {
  Checkpoint ckpt;
  ParamList<float> params;
  if (field.backend == "triplane") {
    field.triplane.collect_params("triplane", params);
    for (const auto& np : params) ckpt.add(np.name, "triplane", np.tensor.shape(), np.tensor.data());
    params.clear();
    field.fdec.collect_params("feature_decoder", params);
    for (const auto& np : params)
      ckpt.add(np.name, "feature_decoder", np.tensor.shape(),
               np.tensor.data());
  } else {
    field.mlp.collect_params("mlp_field", params);
    for (const auto& np : params)
      ckpt.add(np.name, "mlp_field", np.tensor.shape(), np.tensor.data());
  }
  ckpt.add("background.beta", "background", field.beta.shape(),
           field.beta.data());
  ckpt.meta["kind"] = "field";
  ckpt.meta["field"] = {
      {"backend", field.backend},
      {"channels", field.beta.shape()[0]},
      {"scene_radius", scene_radius},
  };
  if (field.backend == "triplane") {
    ckpt.meta["field"]["plane_resolution"] = field.triplane.resolution();
    ckpt.meta["field"]["plane_features"] = field.triplane.features();
    ckpt.meta["field"]["bounds"] = field.triplane.bounds;
  } else {
    ckpt.meta["field"]["pe_order"] = field.mlp.pe_order;
    ckpt.meta["field"]["bounds"] = field.mlp.bounds;
  }
  return ckpt;
}

SceneField field_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("field"))
    throw CheckpointError("checkpoint has no field metadata");
  const json& fm = ckpt.meta["field"];
  SceneField field;
  field.backend = fm.at("backend").get<std::string>();
  const int channels = fm.at("channels").get<int>();
  const double bounds = fm.at("bounds").get<double>();
  Rng rng(0);
  if (field.backend == "triplane") {
    field.triplane =
        TriPlaneT<float>::make(fm.at("plane_resolution").get<int>(),
                               fm.at("plane_features").get<int>(), bounds, rng);
    field.fdec = FeatureDecoderT<float>::make(
        fm.at("plane_features").get<int>(), channels, ChannelKind::latent,
        rng);
    ParamList<float> params;
    field.triplane.collect_params("triplane", params);
    field.fdec.collect_params("feature_decoder", params);
    ckpt.restore_params(params);
  } else {
    field.mlp = MlpFieldT<float>::make(fm.at("pe_order").get<int>(), channels,
                                       ChannelKind::latent, bounds, rng);
    ParamList<float> params;
    field.mlp.collect_params("mlp_field", params);
    ckpt.restore_params(params);
  }
  const CheckpointEntry* be = ckpt.find("background.beta");
  if (!be) throw CheckpointError("field checkpoint is missing the background");
  field.beta = Tensor::from_data(be->shape, be->data, /*requires_grad=*/true);
  return field;
}

Checkpoint make_igae_checkpoint(const AutoencoderT<float>& ae,
                                const LatentSceneSet& scenes) {
  Checkpoint ckpt = make_ae_checkpoint(ae, &scenes.beta);
  ParamList<float> params;
  char name[48];
  for (size_t s = 0; s < scenes.triplanes.size(); ++s) {
    params.clear();
    std::snprintf(name, sizeof name, "triplane.s%03zu", s);
    scenes.triplanes[s].collect_params(name, params);
    for (const auto& np : params)
      ckpt.add(np.name, "triplane", np.tensor.shape(), np.tensor.data());
  }
  params.clear();
  scenes.decoder.collect_params("feature_decoder", params);
  for (const auto& np : params)
    ckpt.add(np.name, "feature_decoder", np.tensor.shape(), np.tensor.data());
  ckpt.meta["kind"] = "igae";
  ckpt.meta["scenes"] = scenes.triplanes.size();
  ckpt.meta["field"] = {
      {"plane_resolution", scenes.triplanes.empty()
                               ? 0
                               : scenes.triplanes[0].resolution()},
      {"plane_features",
       scenes.triplanes.empty() ? 0 : scenes.triplanes[0].features()},
      {"bounds", scenes.triplanes.empty() ? 1.0 : scenes.triplanes[0].bounds},
  };
  return ckpt;
}

}  // namespace igae
