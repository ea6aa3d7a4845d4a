#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cauge/common.hpp"

namespace cauge {

// RGB image, channel-major (CHW), values in [0,1] for anything that leaves
// this module. Stored on disk as binary PPM (8-bit), which round-trips
// within 1/255 per pixel.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<double> px;  // 3*h*w, CHW

  Image() = default;
  Image(int height, int width) : h(height), w(width), px(static_cast<size_t>(3) * height * width, 0.0) {}

  double& at(int c, int y, int x) { return px[(static_cast<size_t>(c) * h + y) * w + x]; }
  double at(int c, int y, int x) const { return px[(static_cast<size_t>(c) * h + y) * w + x]; }

  int64_t numel() const { return static_cast<int64_t>(px.size()); }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w; }
};

void clip01(Image& img);
bool in_unit_range(const Image& img);
double l2_distance(const Image& a, const Image& b);

// Per-pixel luminance (Rec. 601 weights), h*w values.
std::vector<double> luminance(const Image& img);

// Separable Gaussian blur, truncated at 3 sigma, edge-clamped.
// sigma <= 0 returns the input unchanged.
Image gaussian_blur(const Image& img, double sigma);

void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

}  // namespace cauge
