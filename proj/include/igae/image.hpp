#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace igae {

// Planar float image, channel-first [C,H,W], values nominally in [0,1]
// for RGB content (latent images are unbounded).
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;  // C*H*W, row-major per plane

  Image() = default;
  Image(int c, int h, int w, float fill = 0.f)
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, fill) {}

  float& at(int c, int y, int x) {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  float at(int c, int y, int x) const {
    return data[(static_cast<size_t>(c) * height + y) * width + x];
  }
  size_t size() const { return data.size(); }
};

// 8-bit RGB PNG round trip. Reading converts any PNG color type to RGB
// and scales to [0,1]; writing quantizes with round-to-nearest.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

std::vector<uint8_t> quantize_u8(const Image& img);

// Center-crop to square then area-average resample to extent x extent.
Image center_crop_resample(const Image& src, int extent);

// Per-channel min-max normalized copy (used for latent visualization).
Image normalize_per_channel(const Image& img);

// Tile the channels of a latent image into a grayscale grid image.
Image channel_grid(const Image& img);

}  // namespace igae
