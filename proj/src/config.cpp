#include "igae/config.hpp"

#include <fstream>
#include <set>

using nlohmann::json;

namespace igae {

namespace {

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object())
    throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (allowed.count(key)) continue;
    std::string msg = "config: unknown key '" + key + "' in " + where +
                      "; allowed keys:";
    for (const auto& k : allowed) msg += " " + k;
    throw ConfigError(msg);
  }
}

template <class T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void RunConfig::validate() const {
  ae.validate();
  train.weights.validate();
  if (dataset.scenes < 1 || dataset.views < 1 || dataset.extent < 4)
    throw ConfigError("config: dataset counts must be positive");
  if (dataset.extent % ae.downscale != 0)
    throw ConfigError("config: extent " + std::to_string(dataset.extent) +
                      " not divisible by ae.downscale " +
                      std::to_string(ae.downscale));
  if (field.backend != "triplane" && field.backend != "mlp")
    throw ConfigError("config: field.backend must be 'triplane' or 'mlp'");
  if (field.plane_resolution < 2 || field.plane_features < 1 ||
      field.samples_train < 2 || field.samples_eval < 2)
    throw ConfigError("config: field settings out of range");
  if (train.ls_iters < 1 || train.align_iters < 1 || train.batch_views < 1 ||
      train.batch_real < 1 || train.joint_epochs < 1 ||
      train.pretrain_epochs < 1 || train.eval_interval < 1 ||
      train.probe_iters < 1)
    throw ConfigError("config: train counts must be >= 1");
  for (double v : {optim.lr_ae_pretrain, optim.lr_encoder, optim.lr_decoder,
                   optim.lr_triplane, optim.lr_field, optim.lr_decoder_align,
                   optim.decay, optim.decoder_align_decay, optim.xi_ls,
                   optim.xi_align})
    if (!(v > 0.0)) throw ConfigError("config: optim values must be > 0");
  if (train.no_3d && train.no_pr)
    throw ConfigError(
        "config: no_3d and no_pr together remove both objectives; the run "
        "degenerates to no training");
}

RunConfig parse_run_config(const json& j) {
  RunConfig cfg;
  check_keys(j, "root",
             {"seed", "deterministic", "out_dir", "dataset", "ae", "field",
              "optim", "train"});
  get_to(j, "seed", cfg.seed);
  get_to(j, "deterministic", cfg.deterministic);
  get_to(j, "out_dir", cfg.out_dir);

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, "dataset",
               {"scenes", "views", "extent", "difficulty", "camera_distance",
                "fov_y", "real_images", "real_dir"});
    get_to(d, "scenes", cfg.dataset.scenes);
    get_to(d, "views", cfg.dataset.views);
    get_to(d, "extent", cfg.dataset.extent);
    get_to(d, "difficulty", cfg.dataset.difficulty);
    get_to(d, "camera_distance", cfg.dataset.camera_distance);
    get_to(d, "fov_y", cfg.dataset.fov_y);
    get_to(d, "real_images", cfg.dataset.real_images);
    get_to(d, "real_dir", cfg.dataset.real_dir);
  }
  if (j.contains("ae")) {
    const json& a = j.at("ae");
    check_keys(a, "ae", {"downscale", "channels", "schedule", "activation"});
    get_to(a, "downscale", cfg.ae.downscale);
    get_to(a, "channels", cfg.ae.channels);
    if (a.contains("schedule"))
      cfg.ae.schedule = a.at("schedule").get<std::vector<int>>();
    else
      cfg.ae.schedule = AutoencoderSpec::default_schedule(cfg.ae.downscale);
    get_to(a, "activation", cfg.ae.activation);
  }
  if (j.contains("field")) {
    const json& f = j.at("field");
    check_keys(f, "field",
               {"backend", "plane_resolution", "plane_features", "mlp_pe",
                "bounds_scale", "samples_train", "samples_eval"});
    get_to(f, "backend", cfg.field.backend);
    get_to(f, "plane_resolution", cfg.field.plane_resolution);
    get_to(f, "plane_features", cfg.field.plane_features);
    get_to(f, "mlp_pe", cfg.field.mlp_pe);
    get_to(f, "bounds_scale", cfg.field.bounds_scale);
    get_to(f, "samples_train", cfg.field.samples_train);
    get_to(f, "samples_eval", cfg.field.samples_eval);
  }
  if (j.contains("optim")) {
    const json& o = j.at("optim");
    check_keys(o, "optim",
               {"lr_ae_pretrain", "lr_encoder", "lr_decoder", "lr_triplane",
                "lr_field", "lr_decoder_align", "decay",
                "decoder_align_decay", "xi_ls", "xi_align"});
    get_to(o, "lr_ae_pretrain", cfg.optim.lr_ae_pretrain);
    get_to(o, "lr_encoder", cfg.optim.lr_encoder);
    get_to(o, "lr_decoder", cfg.optim.lr_decoder);
    get_to(o, "lr_triplane", cfg.optim.lr_triplane);
    get_to(o, "lr_field", cfg.optim.lr_field);
    get_to(o, "lr_decoder_align", cfg.optim.lr_decoder_align);
    get_to(o, "decay", cfg.optim.decay);
    get_to(o, "decoder_align_decay", cfg.optim.decoder_align_decay);
    get_to(o, "xi_ls", cfg.optim.xi_ls);
    get_to(o, "xi_align", cfg.optim.xi_align);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"ae_pretrain_steps", "pretrain_epochs", "joint_epochs",
                "ls_iters", "align_iters", "batch_views", "batch_real",
                "eval_interval", "probe_iters", "ls_plane_tv", "no_3d",
                "no_pr", "weights"});
    get_to(t, "ae_pretrain_steps", cfg.train.ae_pretrain_steps);
    get_to(t, "pretrain_epochs", cfg.train.pretrain_epochs);
    get_to(t, "joint_epochs", cfg.train.joint_epochs);
    get_to(t, "ls_iters", cfg.train.ls_iters);
    get_to(t, "align_iters", cfg.train.align_iters);
    get_to(t, "batch_views", cfg.train.batch_views);
    get_to(t, "batch_real", cfg.train.batch_real);
    get_to(t, "eval_interval", cfg.train.eval_interval);
    get_to(t, "probe_iters", cfg.train.probe_iters);
    get_to(t, "ls_plane_tv", cfg.train.ls_plane_tv);
    get_to(t, "no_3d", cfg.train.no_3d);
    get_to(t, "no_pr", cfg.train.no_pr);
    if (t.contains("weights")) {
      const json& w = t.at("weights");
      check_keys(w, "train.weights",
                 {"latent", "rgb", "tv3d", "ae_synth", "ae_real", "perceptual",
                  "tv_latent"});
      get_to(w, "latent", cfg.train.weights.latent);
      get_to(w, "rgb", cfg.train.weights.rgb);
      get_to(w, "tv3d", cfg.train.weights.tv3d);
      get_to(w, "ae_synth", cfg.train.weights.ae_synth);
      get_to(w, "ae_real", cfg.train.weights.ae_real);
      get_to(w, "perceptual", cfg.train.weights.perceptual);
      get_to(w, "tv_latent", cfg.train.weights.tv_latent);
    }
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded())
    throw ConfigError("config: " + path + " is not valid JSON");
  return parse_run_config(j);
}

json run_config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["deterministic"] = cfg.deterministic;
  j["out_dir"] = cfg.out_dir;
  j["dataset"] = {{"scenes", cfg.dataset.scenes},
                  {"views", cfg.dataset.views},
                  {"extent", cfg.dataset.extent},
                  {"difficulty", cfg.dataset.difficulty},
                  {"camera_distance", cfg.dataset.camera_distance},
                  {"fov_y", cfg.dataset.fov_y},
                  {"real_images", cfg.dataset.real_images},
                  {"real_dir", cfg.dataset.real_dir}};
  j["ae"] = {{"downscale", cfg.ae.downscale},
             {"channels", cfg.ae.channels},
             {"schedule", cfg.ae.schedule},
             {"activation", cfg.ae.activation}};
  j["field"] = {{"backend", cfg.field.backend},
                {"plane_resolution", cfg.field.plane_resolution},
                {"plane_features", cfg.field.plane_features},
                {"mlp_pe", cfg.field.mlp_pe},
                {"bounds_scale", cfg.field.bounds_scale},
                {"samples_train", cfg.field.samples_train},
                {"samples_eval", cfg.field.samples_eval}};
  j["optim"] = {{"lr_ae_pretrain", cfg.optim.lr_ae_pretrain},
                {"lr_encoder", cfg.optim.lr_encoder},
                {"lr_decoder", cfg.optim.lr_decoder},
                {"lr_triplane", cfg.optim.lr_triplane},
                {"lr_field", cfg.optim.lr_field},
                {"lr_decoder_align", cfg.optim.lr_decoder_align},
                {"decay", cfg.optim.decay},
                {"decoder_align_decay", cfg.optim.decoder_align_decay},
                {"xi_ls", cfg.optim.xi_ls},
                {"xi_align", cfg.optim.xi_align}};
  j["train"] = {{"ae_pretrain_steps", cfg.train.ae_pretrain_steps},
                {"pretrain_epochs", cfg.train.pretrain_epochs},
                {"joint_epochs", cfg.train.joint_epochs},
                {"ls_iters", cfg.train.ls_iters},
                {"align_iters", cfg.train.align_iters},
                {"batch_views", cfg.train.batch_views},
                {"batch_real", cfg.train.batch_real},
                {"eval_interval", cfg.train.eval_interval},
                {"probe_iters", cfg.train.probe_iters},
                {"ls_plane_tv", cfg.train.ls_plane_tv},
                {"no_3d", cfg.train.no_3d},
                {"no_pr", cfg.train.no_pr},
                {"weights",
                 {{"latent", cfg.train.weights.latent},
                  {"rgb", cfg.train.weights.rgb},
                  {"tv3d", cfg.train.weights.tv3d},
                  {"ae_synth", cfg.train.weights.ae_synth},
                  {"ae_real", cfg.train.weights.ae_real},
                  {"perceptual", cfg.train.weights.perceptual},
                  {"tv_latent", cfg.train.weights.tv_latent}}}};
  return j;
}

}  // namespace igae
