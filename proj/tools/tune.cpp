// scratch hyperparameter tuning harness; not part of the deliverable
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "igae/pipelines.hpp"

using namespace igae;

int main(int argc, char** argv) {
  std::string phase = argc > 1 ? argv[1] : "ae";
  RunConfig cfg;
  cfg.out_dir = "/tmp/tune";
  for (int i = 2; i + 1 < argc; i += 2) {
    std::string k = argv[i];
    double v = std::atof(argv[i + 1]);
    if (k == "lr_ae") cfg.optim.lr_ae_pretrain = v;
    else if (k == "steps") cfg.train.ae_pretrain_steps = (int)v;
    else if (k == "lr_tp") cfg.optim.lr_triplane = v;
    else if (k == "lr_field") cfg.optim.lr_field = v;
    else if (k == "xi_ls") cfg.optim.xi_ls = v;
    else if (k == "xi_align") cfg.optim.xi_align = v;
    else if (k == "pre_epochs") cfg.train.pretrain_epochs = (int)v;
    else if (k == "ls_iters") cfg.train.ls_iters = (int)v;
    else if (k == "align_iters") cfg.train.align_iters = (int)v;
    else if (k == "batch") cfg.train.batch_views = (int)v;
    else if (k == "S") cfg.field.samples_train = (int)v;
    else if (k == "K") cfg.field.plane_resolution = (int)v;
    else if (k == "F") cfg.field.plane_features = (int)v;
    else if (k == "extent") cfg.dataset.extent = (int)v;
    else if (k == "real") cfg.dataset.real_images = (int)v;
    else if (k == "seval") cfg.field.samples_eval = (int)v;
    else if (k == "interval") cfg.train.eval_interval = (int)v;
    else if (k == "decay") cfg.optim.decay = v;
    else if (k == "tvlat") cfg.train.weights.tv_latent = v;
    else if (k == "lr_enc") cfg.optim.lr_encoder = v;
    else if (k == "lr_dec") cfg.optim.lr_decoder = v;
    else if (k == "joint_epochs") cfg.train.joint_epochs = (int)v;
    else if (k == "probe_iters") cfg.train.probe_iters = (int)v;
    else if (k == "views") cfg.dataset.views = (int)v;
    else if (k == "perc") cfg.train.weights.perceptual = v;
    else if (k == "aesteps") cfg.train.ae_pretrain_steps = (int)v;
    else { std::printf("unknown key %s\n", k.c_str()); return 2; }
  }
  cfg.validate();

  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  Rng rng(cfg.seed);
  Rng init = rng.derive("init");
  auto proxy = PerceptualProxyT<float>::make(cfg.seed);
  auto ae = AutoencoderT<float>::make(cfg.ae, init);

  std::vector<PosedViewSet> mix_views;
  for (int s = 0; s < 3; ++s)
    mix_views.push_back(build_view_set(make_scene(s, s == 0 ? 0 : 1), 16,
                                       cfg.dataset.extent, 100 + s));

  if (phase == "ae" || phase == "nerf" || phase == "pre") {
    auto real = real_surrogate_stream(cfg.dataset.real_images,
                                      cfg.dataset.extent, cfg.seed);
    Rng ae_rng = rng.derive("ae");
    auto rep = train_autoencoder(ae, real, proxy, cfg, ae_rng, &mix_views);
    std::printf("[%.0fs] ae_heldout_psnr = %.3f (steps=%d lr=%g)\n", elapsed(),
                rep.summary["ae_heldout_psnr"].get<double>(),
                cfg.train.ae_pretrain_steps, cfg.optim.lr_ae_pretrain);
    // also report recon quality on scene views
    auto scene = make_scene(0, 0);
    auto vs = build_view_set(scene, 8, cfg.dataset.extent, 1);
    double acc = 0;
    for (int i = 0; i < 8; ++i) {
      auto x = reshape(image_to_tensor(vs.images[i]),
                       {1, 3, cfg.dataset.extent, cfg.dataset.extent});
      acc += psnr(vs.images[i],
                  tensor_to_image(slice_batch_item(ae.decode(ae.encode(x)), 0)));
    }
    std::printf("[%.0fs] ae_sphere_view_psnr = %.3f\n", elapsed(), acc / 8);
  }

  if (phase == "pre") {
    auto scene = make_scene(0, 0);
    auto vs = build_view_set(scene, cfg.dataset.views, cfg.dataset.extent, 0);
    auto cache = build_latent_cache(ae, vs);
    std::vector<PosedViewSet> views{vs};
    std::vector<LatentCache> caches{cache};
    auto scenes = make_latent_scene_set(1, cfg, ae, init);
    Rng pre_rng = rng.derive("pretrain");
    auto rep = pretrain_latent_scenes(ae, scenes, views, caches, cfg, pre_rng);
    std::printf("[%.0fs] pretrain_train_latent_psnr = %.3f (epochs=%d lr=%g K=%d F=%d)\n",
                elapsed(),
                rep.summary["pretrain_train_latent_psnr"].get<double>(),
                cfg.train.pretrain_epochs, cfg.optim.lr_triplane,
                cfg.field.plane_resolution, cfg.field.plane_features);
    // absolute/unnormalized diagnostics on entry 0
    {
      const auto [near, far] = vs.near_far();
      Rng er(0);
      auto render = render_image(scenes.scene_fn(0),
                                 vs.poses[cache.pose_index[0]], cache.h,
                                 cache.w, cfg.field.samples_eval,
                                 BackgroundModelT<float>::latent(scenes.beta),
                                 er, false, near, far);
      Image ri(cache.c, cache.h, cache.w);
      ri.data = render.values.data();
      Image ci(cache.c, cache.h, cache.w);
      ci.data = cache.latents[0];
      std::vector<Image> refs;
      for (auto& l : cache.latents) {
        Image im(cache.c, cache.h, cache.w);
        im.data = l;
        refs.push_back(im);
      }
      auto stds = per_channel_std(refs);
      double mean_std = 0;
      for (double s : stds) mean_std += s;
      mean_std /= stds.size();
      std::printf("  raw psnr=%.2f norm psnr=%.2f mean_channel_std=%.4f\n",
                  psnr(ri, ci), psnr_normalized(ri, ci, stds), mean_std);
    }
  }

  if (phase == "nerf") {
    auto scene = make_scene(0, 0);
    auto vs = build_view_set(scene, cfg.dataset.views, cfg.dataset.extent, 0);
    auto cache = build_latent_cache(ae, vs);
    auto res_ls = train_latent_nerf(ae, vs, cache, NerfStage::ls, cfg);
    std::printf("[%.0fs] after LS: latent=%.3f rgb=%.3f ssim=%.4f\n",
                elapsed(), res_ls.heldout_latent_psnr,
                res_ls.heldout_rgb_psnr, res_ls.heldout_ssim);
    auto res = train_latent_nerf(ae, vs, cache, NerfStage::align, cfg,
                                 &res_ls.field);
    std::printf("[%.0fs] after align: latent=%.3f rgb=%.3f ssim=%.4f\n",
                elapsed(), res.heldout_latent_psnr, res.heldout_rgb_psnr,
                res.heldout_ssim);
  }

  if (phase == "igae5") {
    // criterion-5 rehearsal: directions of effect on the 8-scene fixture
    const int S = 8;
    std::vector<PosedViewSet> views;
    std::vector<ProceduralScene> scenes_geo;
    Rng ds = Rng(cfg.seed).derive("dataset");
    for (int s = 0; s < S; ++s) {
      scenes_geo.push_back(
          make_scene(ds.derive((uint64_t)s).next_u64(), cfg.dataset.difficulty));
      views.push_back(build_view_set(scenes_geo.back(), cfg.dataset.views,
                                     cfg.dataset.extent,
                                     ds.derive(1000 + (uint64_t)s).next_u64()));
    }
    auto real = real_surrogate_stream(cfg.dataset.real_images,
                                      cfg.dataset.extent, cfg.seed);
    // baseline AE
    Rng ae_rng = Rng(cfg.seed).derive("ae-pretrain");
    auto base_ae = AutoencoderT<float>::make(cfg.ae, init);
    auto rep0 = train_autoencoder(base_ae, real, proxy, cfg, ae_rng, &views);
    std::printf("[%.0fs] baseline ae: heldout %.2f\n", elapsed(),
                rep0.summary["ae_heldout_psnr"].get<double>());
    auto base_ckpt = make_ae_checkpoint(base_ae, nullptr);

    // caches + pretrained scene set against the frozen baseline
    std::vector<LatentCache> caches;
    for (auto& vs : views) caches.push_back(build_latent_cache(base_ae, vs));
    Rng sinit = Rng(cfg.seed).derive("scenes-init");
    auto scene_set0 = make_latent_scene_set(S, cfg, base_ae, sinit);
    Rng pre_rng = Rng(cfg.seed).derive("pretrain");
    auto repp =
        pretrain_latent_scenes(base_ae, scene_set0, views, caches, cfg, pre_rng);
    std::printf("[%.0fs] pretrain: train latent %.2f\n", elapsed(),
                repp.summary["pretrain_train_latent_psnr"].get<double>());
    auto scenes_ckpt = make_igae_checkpoint(base_ae, scene_set0);

    auto restore_world = [&](bool no3d, bool nopr) {
      auto ae = ae_from_checkpoint(base_ckpt, nullptr);
      auto set = make_latent_scene_set(S, cfg, ae, sinit = Rng(cfg.seed).derive("scenes-init"));
      // overwrite with the pretrained values
      ParamList<float> params = set.params();
      scenes_ckpt.restore_params(params);
      RunConfig c = cfg;
      c.train.no_3d = no3d;
      c.train.no_pr = nopr;
      return std::tuple{std::move(ae), std::move(set), c};
    };

    double recon[3], probe_v[3];
    const char* names[3] = {"full", "no3d", "nopr"};
    AutoencoderT<float> trained_full, trained_base = base_ae;
    for (int v = 0; v < 3; ++v) {
      auto [ae, set, c] = restore_world(v == 1, v == 2);
      Rng joint = Rng(cfg.seed).derive("joint");
      auto rep = train_igae_joint(ae, set, views, real, proxy, c, joint);
      recon[v] = rep.summary["igae_heldout_real_psnr"].get<double>();
      double acc = 0;
      for (int s = 0; s < S; ++s)
        acc += consistency_probe(ae_encoder_fn(ae), views[s], cfg, s);
      probe_v[v] = acc / S;
      std::printf("[%.0fs] %s: recon %.2f, probe %.2f, joint latent %.2f\n",
                  elapsed(), names[v], recon[v], probe_v[v],
                  rep.summary["igae_heldout_latent_psnr"].get<double>());
      if (v == 0) trained_full = ae;
    }
    double base_probe = 0;
    for (int s = 0; s < S; ++s)
      base_probe += consistency_probe(ae_encoder_fn(base_ae), views[s], cfg, s);
    base_probe /= S;
    double base_recon = rep0.summary["ae_heldout_psnr"].get<double>();
    std::printf("[%.0fs] baseline: recon %.2f, probe %.2f\n", elapsed(),
                base_recon, base_probe);

    // latent NVS on a held-out scene, LS stage, both backends
    auto eval_scene = make_scene(ds.derive(9999).next_u64(), cfg.dataset.difficulty);
    auto eval_views = build_view_set(eval_scene, cfg.dataset.views,
                                     cfg.dataset.extent,
                                     ds.derive(8888).next_u64());
    for (const char* backend : {"triplane", "mlp"}) {
      double nvs[2];
      int bi = 0;
      for (auto* ae : {&trained_base, &trained_full}) {
        RunConfig c = cfg;
        c.field.backend = backend;
        auto cache = build_latent_cache(*ae, eval_views);
        auto res = train_latent_nerf(*ae, eval_views, cache, NerfStage::ls, c);
        auto rows = latent_nvs_eval(*ae, res.field, eval_views, c);
        double acc = 0;
        for (auto& r : rows) acc += r.psnr;
        nvs[bi++] = acc / rows.size();
      }
      std::printf("[%.0fs] nvs %s: baseline %.2f vs igae %.2f\n", elapsed(),
                  backend, nvs[0], nvs[1]);
    }

    std::printf("[%.0fs] directions: (a) %s (b) see above (c) %.2f dB drop %s (d) %s\n",
                elapsed(), probe_v[0] > base_probe ? "OK" : "FAIL",
                recon[0] - recon[2], recon[0] - recon[2] >= 3 ? "OK" : "FAIL",
                probe_v[1] < probe_v[0] ? "OK" : "FAIL");
  }

  std::printf("[%.0fs] done\n", elapsed());
  return 0;
}
