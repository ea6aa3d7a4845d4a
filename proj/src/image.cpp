#include "cauge/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "cauge/kernels.hpp"

namespace cauge {

void clip01(Image& img) { kernels::active().clip01(img.px.data(), img.numel()); }

bool in_unit_range(const Image& img) {
  for (double v : img.px)
    if (!(v >= 0.0 && v <= 1.0)) return false;
  return true;
}

double l2_distance(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw DimensionError("l2_distance: image shapes differ");
  double s = 0.0;
  for (size_t i = 0; i < a.px.size(); ++i) {
    const double d = a.px[i] - b.px[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<double> luminance(const Image& img) {
  const size_t n = static_cast<size_t>(img.h) * img.w;
  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i)
    y[i] = 0.299 * img.px[i] + 0.587 * img.px[n + i] + 0.114 * img.px[2 * n + i];
  return y;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<size_t>(i + radius)] = v;
    norm += v;
  }
  for (auto& v : k) v /= norm;

  Image tmp(img.h, img.w);
  Image out(img.h, img.w);
  for (int c = 0; c < 3; ++c) {
    // horizontal
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int xx = std::clamp(x + i, 0, img.w - 1);
          s += k[static_cast<size_t>(i + radius)] * img.at(c, y, xx);
        }
        tmp.at(c, y, x) = s;
      }
    // vertical
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) {
        double s = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int yy = std::clamp(y + i, 0, img.h - 1);
          s += k[static_cast<size_t>(i + radius)] * tmp.at(c, yy, x);
        }
        out.at(c, y, x) = s;
      }
  }
  return out;
}

void write_ppm(const Image& img, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f << "P6\n" << img.w << " " << img.h << "\n255\n";
  std::vector<unsigned char> row(static_cast<size_t>(img.w) * 3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        row[static_cast<size_t>(x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    f.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!f) throw IoError("write failed: " + path);
}

Image read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open image file: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P6" || maxval != 255 || w <= 0 || h <= 0)
    throw IoError("unsupported PPM header in " + path);
  f.get();  // single whitespace after header
  Image img(h, w);
  std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
    if (!f) throw IoError("truncated PPM data in " + path);
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = row[static_cast<size_t>(x) * 3 + c] / 255.0;
  }
  return img;
}

}  // namespace cauge
