#include "igae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace igae {

namespace {

void check_same_extent(const Image& a, const Image& b, const char* op) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width)
    throw std::invalid_argument(std::string(op) +
                                ": image extents differ");
}

std::vector<double> grayscale(const Image& img) {
  std::vector<double> g(static_cast<size_t>(img.height) * img.width, 0.0);
  const size_t plane = g.size();
  for (int c = 0; c < img.channels; ++c)
    for (size_t i = 0; i < plane; ++i) g[i] += img.data[c * plane + i];
  for (auto& v : g) v /= img.channels;
  return g;
}

}  // namespace

double psnr(const Image& a, const Image& b) {
  check_same_extent(a, b, "psnr");
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  const double mse = acc / a.size();
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

double psnr_normalized(const Image& a, const Image& b,
                       const std::vector<double>& channel_std) {
  check_same_extent(a, b, "psnr_normalized");
  if (static_cast<int>(channel_std.size()) != a.channels)
    throw std::invalid_argument("psnr_normalized: std size mismatch");
  const size_t plane = static_cast<size_t>(a.height) * a.width;
  double acc = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    const double s = channel_std[c] > 1e-12 ? channel_std[c] : 1.0;
    for (size_t i = 0; i < plane; ++i) {
      const double d =
          (static_cast<double>(a.data[c * plane + i]) - b.data[c * plane + i]) /
          s;
      acc += d * d;
    }
  }
  const double mse = acc / a.size();
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

std::vector<double> per_channel_std(const std::vector<Image>& images) {
  if (images.empty())
    throw std::invalid_argument("per_channel_std: empty set");
  const int C = images[0].channels;
  std::vector<double> mean(C, 0.0), m2(C, 0.0);
  std::vector<int64_t> count(C, 0);
  for (const auto& img : images) {
    const size_t plane = static_cast<size_t>(img.height) * img.width;
    for (int c = 0; c < C; ++c)
      for (size_t i = 0; i < plane; ++i) {
        const double v = img.data[c * plane + i];
        mean[c] += v;
        m2[c] += v * v;
        ++count[c];
      }
  }
  std::vector<double> out(C);
  for (int c = 0; c < C; ++c) {
    const double mu = mean[c] / count[c];
    const double var = std::max(0.0, m2[c] / count[c] - mu * mu);
    out[c] = std::sqrt(var);
  }
  return out;
}

double ssim(const Image& a, const Image& b) {
  check_same_extent(a, b, "ssim");
  const auto ga = grayscale(a);
  const auto gb = grayscale(b);
  const int H = a.height, W = a.width;

  int win = std::min({11, H, W});
  if (win % 2 == 0) --win;
  const int r = win / 2;
  const double sigma = 1.5;
  std::vector<double> kernel(static_cast<size_t>(win) * win);
  double ksum = 0.0;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) {
      const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      kernel[(dy + r) * win + dx + r] = v;
      ksum += v;
    }
  for (auto& v : kernel) v /= ksum;

  const double c1 = 0.01 * 0.01;  // (k1 L)^2, L = 1
  const double c2 = 0.03 * 0.03;
  double acc = 0.0;
  int64_t windows = 0;
  for (int y = r; y < H - r; ++y)
    for (int x = r; x < W - r; ++x) {
      double mx = 0, my = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double k = kernel[(dy + r) * win + dx + r];
          mx += k * ga[(y + dy) * W + x + dx];
          my += k * gb[(y + dy) * W + x + dx];
        }
      double vx = 0, vy = 0, cov = 0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const double k = kernel[(dy + r) * win + dx + r];
          const double da = ga[(y + dy) * W + x + dx] - mx;
          const double db = gb[(y + dy) * W + x + dx] - my;
          vx += k * da * da;
          vy += k * db * db;
          cov += k * da * db;
        }
      const double s = ((2 * mx * my + c1) * (2 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
      acc += s;
      ++windows;
    }
  if (windows == 0)
    throw std::invalid_argument("ssim: image smaller than the window");
  return acc / windows;
}

void write_metric_rows(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "scene_id,view_id,space,psnr,ssim\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%s,%.9g,%.9g\n", r.scene_id,
                  r.view_id, r.space.c_str(), r.psnr, r.ssim);
    out << buf;
  }
}

void write_bench_rows(const std::string& path,
                      const std::vector<BenchRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "backend,space,mean_render_ms,mean_decode_ms,pixels_touched,"
         "train_minutes\n";
  char buf[200];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.9g,%.9g,%lld,%.9g\n",
                  r.backend.c_str(), r.space.c_str(), r.mean_render_ms,
                  r.mean_decode_ms, static_cast<long long>(r.pixels_touched),
                  r.train_minutes);
    out << buf;
  }
}

}  // namespace igae
