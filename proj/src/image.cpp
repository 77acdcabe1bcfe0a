#include "igae/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace igae {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

std::vector<uint8_t> quantize_u8(const Image& img) {
  std::vector<uint8_t> out(img.size());
  for (size_t i = 0; i < img.size(); ++i) {
    const float v = std::clamp(img.data[i], 0.f, 1.f);
    out[i] = static_cast<uint8_t>(std::lround(v * 255.f));
  }
  return out;
}

void write_png(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3)
    throw std::invalid_argument("write_png: expected 1 or 3 channels, got " +
                                std::to_string(img.channels));
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("write_png: cannot open " + path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("write_png: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("write_png: init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("write_png: libpng error writing " + path);
  }
  png_init_io(png, fp.get());
  const int color =
      img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, img.width, img.height, 8, color,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);

  const auto q = quantize_u8(img);
  std::vector<uint8_t> row(static_cast<size_t>(img.width) * img.channels);
  const size_t plane = static_cast<size_t>(img.height) * img.width;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        row[x * img.channels + c] = q[c * plane + y * img.width + x];
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("read_png: cannot open " + path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("read_png: init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("read_png: init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("read_png: libpng error reading " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  // normalize everything to 8-bit RGB
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  std::vector<uint8_t> raw(static_cast<size_t>(h) * w * 3);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = raw.data() + static_cast<size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(3, h, w);
  const size_t plane = static_cast<size_t>(h) * w;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.data[c * plane + y * static_cast<size_t>(w) + x] =
            raw[(static_cast<size_t>(y) * w + x) * 3 + c] / 255.f;
  return img;
}

Image center_crop_resample(const Image& src, int extent) {
  if (extent < 1) throw std::invalid_argument("center_crop_resample: extent < 1");
  const int side = std::min(src.height, src.width);
  const int y0 = (src.height - side) / 2;
  const int x0 = (src.width - side) / 2;

  Image out(src.channels, extent, extent);
  // area-average resample: each target pixel integrates its exact
  // source footprint of side/extent source pixels
  const double scale = static_cast<double>(side) / extent;
  for (int c = 0; c < src.channels; ++c)
    for (int ty = 0; ty < extent; ++ty) {
      const double sy0 = ty * scale, sy1 = (ty + 1) * scale;
      for (int tx = 0; tx < extent; ++tx) {
        const double sx0 = tx * scale, sx1 = (tx + 1) * scale;
        double acc = 0.0;
        for (int sy = static_cast<int>(sy0); sy < sy1 && sy < side; ++sy) {
          const double hy = std::min(sy1, sy + 1.0) - std::max(sy0, static_cast<double>(sy));
          for (int sx = static_cast<int>(sx0); sx < sx1 && sx < side; ++sx) {
            const double hx =
                std::min(sx1, sx + 1.0) - std::max(sx0, static_cast<double>(sx));
            acc += hy * hx * src.at(c, y0 + sy, x0 + sx);
          }
        }
        out.at(c, ty, tx) = static_cast<float>(acc / (scale * scale));
      }
    }
  return out;
}

Image normalize_per_channel(const Image& img) {
  Image out = img;
  const size_t plane = static_cast<size_t>(img.height) * img.width;
  for (int c = 0; c < img.channels; ++c) {
    float lo = img.data[c * plane], hi = lo;
    for (size_t i = 0; i < plane; ++i) {
      lo = std::min(lo, img.data[c * plane + i]);
      hi = std::max(hi, img.data[c * plane + i]);
    }
    const float span = hi - lo > 1e-12f ? hi - lo : 1.f;
    for (size_t i = 0; i < plane; ++i)
      out.data[c * plane + i] = (img.data[c * plane + i] - lo) / span;
  }
  return out;
}

Image channel_grid(const Image& img) {
  const int cols = static_cast<int>(std::ceil(std::sqrt(img.channels)));
  const int rows = (img.channels + cols - 1) / cols;
  const Image norm = normalize_per_channel(img);
  Image grid(1, rows * img.height, cols * img.width, 0.f);
  for (int c = 0; c < img.channels; ++c) {
    const int gy = (c / cols) * img.height;
    const int gx = (c % cols) * img.width;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        grid.at(0, gy + y, gx + x) = norm.at(c, y, x);
  }
  return grid;
}

}  // namespace igae
