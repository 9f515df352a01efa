#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "coreuda/tensor.hpp"

namespace coreuda {

// RGB image, channel-last (H x W x 3), values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<size_t>(h) * w * 3, fill) {}

  float& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  size_t size() const { return data.size(); }
};

// Exact left-right mirror (pure index permutation).
Image hflip(const Image& img);

// Bilinear resize with a mirror-symmetric weight table: resizing a flipped
// image gives bitwise the flipped resize of the original.
Image resize_bilinear(const Image& img, int out_h, int out_w);

// Replicates border pixels `pad` wide on all four sides.
Image edge_pad(const Image& img, int pad);

Image crop(const Image& img, int y0, int x0, int h, int w);

// Binary PPM (P6, 8-bit). Quantization is round(v * 255) clamped to [0, 255].
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

}  // namespace coreuda
