#pragma once

#include <string>
#include <vector>

#include "igae/image.hpp"

namespace igae {

struct MetricRow {
  int scene_id = 0;
  int view_id = 0;
  std::string space;  // "rgb" | "latent"
  double psnr = 0;
  double ssim = 0;
};

struct BenchRow {
  std::string backend;
  std::string space;  // "rgb" | "latent"
  double mean_render_ms = 0;
  double mean_decode_ms = 0;
  int64_t pixels_touched = 0;
  double train_minutes = 0;
};

// -10 log10(mse) over [0,1] content, capped at 99 dB for identical inputs.
double psnr(const Image& a, const Image& b);

// Latent-space variant: residuals are normalized by a per-channel dynamic
// range (std of the reference set) before the mse.
double psnr_normalized(const Image& a, const Image& b,
                       const std::vector<double>& channel_std);

std::vector<double> per_channel_std(const std::vector<Image>& images);

// Mean local SSIM; grayscale by channel mean, Gaussian window (11x11,
// sigma 1.5, shrunk to fit small images), k1=0.01 k2=0.03, range 1.
double ssim(const Image& a, const Image& b);

void write_metric_rows(const std::string& path,
                       const std::vector<MetricRow>& rows);
void write_bench_rows(const std::string& path,
                      const std::vector<BenchRow>& rows);

}  // namespace igae
