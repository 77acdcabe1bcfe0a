#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "igae/cli.hpp"
#include "igae/pipelines.hpp"

using namespace igae;
namespace fs = std::filesystem;

namespace {

struct CliWorld {
  fs::path root;
  std::string out, data, cfg_path, ae_path;

  CliWorld() {
    root = fs::temp_directory_path() /
           ("igae_cli_" + std::to_string(reinterpret_cast<uintptr_t>(this)));
    fs::create_directories(root);
    out = (root / "out").string();
    data = (root / "out/dataset").string();
    cfg_path = (root / "cfg.json").string();
    // tiny everything: 16x16 images, 4x4 latents
    std::ofstream cfg(cfg_path);
    cfg << R"({
      "dataset": {"scenes": 1, "views": 10, "extent": 16, "difficulty": 0,
                   "real_images": 16},
      "field": {"plane_resolution": 16, "plane_features": 4,
                 "samples_train": 8, "samples_eval": 8},
      "train": {"ae_pretrain_steps": 8, "pretrain_epochs": 2,
                 "joint_epochs": 1, "ls_iters": 20, "align_iters": 16,
                 "batch_views": 2, "batch_real": 2, "eval_interval": 50,
                 "probe_iters": 10}
    })";
  }
  ~CliWorld() { fs::remove_all(root); }

  int run(std::vector<std::string> args) {
    std::vector<std::string> full{"igae", "--config", cfg_path, "--out-dir",
                                  out};
    full.insert(full.end(), args.begin(), args.end());
    return cli_dispatch(full);
  }

  void make_ae() {
    // small untrained AE is enough for wiring tests
    RunConfig cfg;
    Rng rng(0);
    auto ae = AutoencoderT<float>::make(cfg.ae, rng);
    ae_path = (root / "ae.ckpt").string();
    save_checkpoint(ae_path, make_ae_checkpoint(ae, nullptr));
  }
};

std::vector<std::string> read_lines(const std::string& path, size_t limit) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (lines.size() < limit && std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("unknown flags and bad configs exit with code 2") {
  CHECK(cli_dispatch({"igae", "--frobnicate"}) == 2);
  CHECK(cli_dispatch({"igae", "no-such-command"}) == 2);
  CHECK(cli_dispatch({"igae", "train-igae", "--no-3d", "--no-pr"}) == 2);

  const auto bad = fs::temp_directory_path() / "igae_bad_cfg.json";
  std::ofstream(bad.string()) << R"({"sede": 1})";
  CHECK(cli_dispatch({"igae", "--config", bad.string(), "gen-data"}) == 2);
  fs::remove(bad);
}

TEST_CASE("runtime failures exit with code 1") {
  CliWorld w;
  // eval on a missing checkpoint is a runtime failure
  CHECK(w.run({"eval", "--ckpt", "/nonexistent.ckpt"}) == 1);
}

TEST_CASE("gen-data writes scenes, real images and an echoed config") {
  CliWorld w;
  REQUIRE(w.run({"gen-data"}) == 0);
  CHECK(fs::exists(w.data + "/scene_000/meta.json"));
  CHECK(fs::exists(w.data + "/scene_000/view_000.png"));
  CHECK(fs::exists(w.data + "/real/img_0000.png"));
  CHECK(fs::exists(w.out + "/config.json"));
  auto views = load_view_set(w.data + "/scene_000");
  CHECK(views.poses.size() == 10);
}

TEST_CASE("train-nerf staged vs both gives matching final metrics") {
  CliWorld w;
  w.make_ae();
  REQUIRE(w.run({"gen-data"}) == 0);

  // path A: single process, both stages
  REQUIRE(w.run({"--seed", "3", "train-nerf", "--ae", w.ae_path, "--stage",
                 "both"}) == 0);
  const auto both = nlohmann::json::parse(
      std::ifstream(w.out + "/report.json"));

  // path B: ls, checkpoint, then align resuming from the checkpoint
  REQUIRE(w.run({"--seed", "3", "train-nerf", "--ae", w.ae_path, "--stage",
                 "ls"}) == 0);
  REQUIRE(w.run({"--seed", "3", "train-nerf", "--ae", w.ae_path, "--stage",
                 "align", "--field",
                 w.out + "/nerf_scene000_ls.ckpt"}) == 0);
  const auto split = nlohmann::json::parse(
      std::ifstream(w.out + "/report.json"));

  for (const char* key :
       {"heldout_latent_psnr", "heldout_rgb_psnr", "heldout_ssim"}) {
    CHECK(std::abs(both.at(key).get<double>() -
                   split.at(key).get<double>()) < 1e-6);
  }
}

TEST_CASE("render writes latent previews at latent extent and rgb at full") {
  CliWorld w;
  w.make_ae();
  REQUIRE(w.run({"gen-data"}) == 0);
  REQUIRE(w.run({"train-nerf", "--ae", w.ae_path, "--stage", "ls"}) == 0);
  const std::string ckpt = w.out + "/nerf_scene000_ls.ckpt";

  const std::string lat_png = w.out + "/lat.png";
  REQUIRE(w.run({"render", "--ckpt", ckpt, "--ae", w.ae_path, "--pose-index",
                 "2", "--latent", "--out", lat_png}) == 0);
  auto lat = read_png(lat_png);
  CHECK(lat.height == 4);  // 16 / l=4
  CHECK(lat.width == 4);
  CHECK(fs::exists(lat_png + ".grid.png"));

  const std::string rgb_png = w.out + "/rgb.png";
  REQUIRE(w.run({"render", "--ckpt", ckpt, "--ae", w.ae_path, "--pose-index",
                 "2", "--rgb", "--out", rgb_png}) == 0);
  auto rgb = read_png(rgb_png);
  CHECK(rgb.height == 16);
  CHECK(rgb.width == 16);

  // exactly one of --latent/--rgb
  CHECK(w.run({"render", "--ckpt", ckpt, "--pose-index", "2", "--out",
               lat_png}) == 2);
}

TEST_CASE("eval works on a field checkpoint without the original config") {
  CliWorld w;
  w.make_ae();
  REQUIRE(w.run({"gen-data"}) == 0);
  REQUIRE(w.run({"train-nerf", "--ae", w.ae_path, "--stage", "both"}) == 0);
  // fresh out dir, no --config: the checkpoint is self-describing
  const std::string eval_out = (w.root / "eval_out").string();
  CHECK(cli_dispatch({"igae", "--out-dir", eval_out, "--data", w.data, "eval",
                      "--ckpt", w.out + "/nerf_scene000_both.ckpt"}) == 0);
  CHECK(fs::exists(eval_out + "/metrics.csv"));
  CHECK(fs::exists(eval_out + "/report.json"));
}

TEST_CASE("deterministic reruns produce bit-identical metrics and ckpts") {
  CliWorld w;
  w.make_ae();
  REQUIRE(w.run({"gen-data"}) == 0);

  REQUIRE(w.run({"--deterministic", "--seed", "5", "train-nerf", "--ae",
                 w.ae_path, "--stage", "both"}) == 0);
  const auto rows1 = read_lines(w.out + "/metrics.csv", 50);
  const uint64_t hash1 = file_fnv1a(w.out + "/nerf_scene000_both.ckpt");

  REQUIRE(w.run({"--deterministic", "--seed", "5", "train-nerf", "--ae",
                 w.ae_path, "--stage", "both"}) == 0);
  const auto rows2 = read_lines(w.out + "/metrics.csv", 50);
  const uint64_t hash2 = file_fnv1a(w.out + "/nerf_scene000_both.ckpt");

  CHECK(rows1 == rows2);
  CHECK(hash1 == hash2);
}

TEST_CASE("probe-consistency and bench write their tables") {
  CliWorld w;
  w.make_ae();
  REQUIRE(w.run({"gen-data"}) == 0);
  REQUIRE(w.run({"probe-consistency", "--ae", w.ae_path}) == 0);
  CHECK(fs::exists(w.out + "/probe.csv"));
  REQUIRE(w.run({"bench", "--repeats", "3"}) == 0);
  CHECK(fs::exists(w.out + "/bench.csv"));
  auto lines = read_lines(w.out + "/bench.csv", 3);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] ==
        "backend,space,mean_render_ms,mean_decode_ms,pixels_touched,"
        "train_minutes");
  // latent row touches 1/l^2 the pixels of the rgb row
  CHECK(lines[1].find("latent") != std::string::npos);
  CHECK(lines[1].find(",16,") != std::string::npos);   // 4x4
  CHECK(lines[2].find(",256,") != std::string::npos);  // 16x16
}

TEST_SUITE_END();
