#include "cauge/intervene.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "cauge/dft.hpp"

namespace cauge::intervene {

namespace {

// Severity (s in 1..10) -> op parameter. Frozen; identity is approached as
// s -> 0 and the mapping is monotone in s.
double blend_factor(int s, double per_step) { return 1.0 - per_step * s; }
constexpr double kSeverityBrightnessStep = 0.07;   // factor 0.93 .. 0.30
constexpr double kSeverityContrastStep = 0.085;    // factor 0.915 .. 0.15
constexpr double kSeverityColorStep = 0.085;       // factor 0.915 .. 0.15
constexpr double kSeveritySharpnessStep = 0.09;    // factor 0.91 .. 0.10
constexpr double kSeveritySolarizeStep = 0.09;     // threshold 0.91 .. 0.10
inline int posterize_bits(int s) { return std::max(1, 8 - (7 * s + 5) / 10); }  // 7 .. 1

void check_severity(int severity) {
  if (severity < 1 || severity > 10)
    throw ConfigError("severity must be in 1..10, got " + std::to_string(severity));
}

double channel_min(const Image& img, int c) {
  const size_t n = static_cast<size_t>(img.h) * img.w;
  double m = img.px[static_cast<size_t>(c) * n];
  for (size_t i = 0; i < n; ++i) m = std::min(m, img.px[static_cast<size_t>(c) * n + i]);
  return m;
}
double channel_max(const Image& img, int c) {
  const size_t n = static_cast<size_t>(img.h) * img.w;
  double m = img.px[static_cast<size_t>(c) * n];
  for (size_t i = 0; i < n; ++i) m = std::max(m, img.px[static_cast<size_t>(c) * n + i]);
  return m;
}

}  // namespace

const char* op_name(PhotoOp op) {
  switch (op) {
    case PhotoOp::Autocontrast: return "autocontrast";
    case PhotoOp::Equalize: return "equalize";
    case PhotoOp::Posterize: return "posterize";
    case PhotoOp::Solarize: return "solarize";
    case PhotoOp::Color: return "color";
    case PhotoOp::Contrast: return "contrast";
    case PhotoOp::Brightness: return "brightness";
    case PhotoOp::Sharpness: return "sharpness";
  }
  return "?";
}

PhotoOp op_from_name(const std::string& name) {
  for (int i = 0; i < kNumPhotoOps; ++i) {
    const auto op = static_cast<PhotoOp>(i);
    if (name == op_name(op)) return op;
  }
  throw ConfigError("unknown photometric op '" + name +
                    "' (spatial ops such as shear/translate/rotate are not available)");
}

Image apply_brightness(const Image& img, double factor) {
  Image out = img;
  for (auto& v : out.px) v *= factor;
  clip01(out);
  return out;
}

Image apply_contrast(const Image& img, double factor) {
  if (factor == 1.0) return img;
  const auto luma = luminance(img);
  double mean = 0.0;
  for (double v : luma) mean += v;
  mean /= static_cast<double>(luma.size());
  Image out = img;
  for (auto& v : out.px) v = mean + factor * (v - mean);
  clip01(out);
  return out;
}

Image apply_color(const Image& img, double factor) {
  if (factor == 1.0) return img;
  const auto luma = luminance(img);
  const size_t n = luma.size();
  Image out = img;
  for (int c = 0; c < 3; ++c)
    for (size_t i = 0; i < n; ++i) {
      double& v = out.px[static_cast<size_t>(c) * n + i];
      v = luma[i] + factor * (v - luma[i]);
    }
  clip01(out);
  return out;
}

Image apply_sharpness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  // 3x3 smoothing kernel [[1,1,1],[1,5,1],[1,1,1]]/13 on the interior;
  // border pixels stay untouched
  Image smooth = img;
  for (int c = 0; c < 3; ++c)
    for (int y = 1; y + 1 < img.h; ++y)
      for (int x = 1; x + 1 < img.w; ++x) {
        double s = 5.0 * img.at(c, y, x);
        s += img.at(c, y - 1, x - 1) + img.at(c, y - 1, x) + img.at(c, y - 1, x + 1);
        s += img.at(c, y, x - 1) + img.at(c, y, x + 1);
        s += img.at(c, y + 1, x - 1) + img.at(c, y + 1, x) + img.at(c, y + 1, x + 1);
        smooth.at(c, y, x) = s / 13.0;
      }
  Image out = img;
  for (size_t i = 0; i < out.px.size(); ++i)
    out.px[i] = smooth.px[i] + factor * (img.px[i] - smooth.px[i]);
  clip01(out);
  return out;
}

Image apply_solarize(const Image& img, double threshold) {
  Image out = img;
  for (auto& v : out.px)
    if (v > threshold) v = 1.0 - v;
  clip01(out);
  return out;
}

Image apply_posterize(const Image& img, int bits) {
  if (bits < 1 || bits > 8) throw ConfigError("posterize bits must be in 1..8");
  const unsigned mask = ~((1u << (8 - bits)) - 1u) & 0xffu;
  Image out = img;
  for (auto& v : out.px) {
    const unsigned q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    v = static_cast<double>(q & mask) / 255.0;
  }
  return out;
}

Image apply_autocontrast(const Image& img) {
  Image out = img;
  const size_t n = static_cast<size_t>(img.h) * img.w;
  for (int c = 0; c < 3; ++c) {
    const double lo = channel_min(img, c), hi = channel_max(img, c);
    if (hi - lo < 1e-12) continue;
    const double scale = 1.0 / (hi - lo);
    for (size_t i = 0; i < n; ++i) {
      double& v = out.px[static_cast<size_t>(c) * n + i];
      v = (v - lo) * scale;
    }
  }
  clip01(out);
  return out;
}

Image apply_equalize(const Image& img) {
  const size_t n = static_cast<size_t>(img.h) * img.w;
  Image out = img;
  for (int c = 0; c < 3; ++c) {
    std::array<int, 256> hist{};
    for (size_t i = 0; i < n; ++i) {
      const int q = static_cast<int>(
          std::lround(std::clamp(img.px[static_cast<size_t>(c) * n + i], 0.0, 1.0) * 255.0));
      ++hist[static_cast<size_t>(q)];
    }
    // PIL-style lookup: step = (pixels - last nonzero bin count) / 255
    int last = 255;
    while (last > 0 && hist[static_cast<size_t>(last)] == 0) --last;
    const long step = (static_cast<long>(n) - hist[static_cast<size_t>(last)]) / 255;
    if (step <= 0) continue;  // effectively constant channel
    std::array<double, 256> lut{};
    long acc = step / 2;
    for (int q = 0; q < 256; ++q) {
      lut[static_cast<size_t>(q)] = std::clamp(static_cast<double>(acc / step), 0.0, 255.0) / 255.0;
      acc += hist[static_cast<size_t>(q)];
    }
    for (size_t i = 0; i < n; ++i) {
      double& v = out.px[static_cast<size_t>(c) * n + i];
      const int q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      v = lut[static_cast<size_t>(q)];
    }
  }
  clip01(out);
  return out;
}

Image apply_photometric_op(const Image& img, PhotoOp op, int severity) {
  check_severity(severity);
  switch (op) {
    case PhotoOp::Autocontrast: return apply_autocontrast(img);
    case PhotoOp::Equalize: return apply_equalize(img);
    case PhotoOp::Posterize: return apply_posterize(img, posterize_bits(severity));
    case PhotoOp::Solarize:
      return apply_solarize(img, blend_factor(severity, kSeveritySolarizeStep));
    case PhotoOp::Color: return apply_color(img, blend_factor(severity, kSeverityColorStep));
    case PhotoOp::Contrast:
      return apply_contrast(img, blend_factor(severity, kSeverityContrastStep));
    case PhotoOp::Brightness:
      return apply_brightness(img, blend_factor(severity, kSeverityBrightnessStep));
    case PhotoOp::Sharpness:
      return apply_sharpness(img, blend_factor(severity, kSeveritySharpnessStep));
  }
  throw ConfigError("unhandled photometric op");
}

Image apply_photometric_op(const Image& img, const std::string& name, int severity) {
  return apply_photometric_op(img, op_from_name(name), severity);
}

void AugmixConfig::validate() const {
  if (width < 1) throw ConfigError("augmix width must be >= 1");
  if (max_depth < 1) throw ConfigError("augmix max_depth must be >= 1");
  check_severity(severity);
  if (!(dirichlet_alpha > 0.0) || !(beta_alpha > 0.0))
    throw ConfigError("augmix alphas must be > 0");
  if (allowed_ops.empty()) throw ConfigError("augmix allowed_ops must be non-empty");
}

AugmixPlan sample_augmix_plan(const AugmixConfig& cfg, Rng& rng) {
  cfg.validate();
  AugmixPlan plan;
  plan.weights = rng.dirichlet(cfg.dirichlet_alpha, cfg.width);
  plan.m = rng.beta(cfg.beta_alpha, cfg.beta_alpha);
  plan.chains.resize(static_cast<size_t>(cfg.width));
  for (auto& chain : plan.chains) {
    const int depth = rng.uniform_int(1, cfg.max_depth);
    chain.resize(static_cast<size_t>(depth));
    for (auto& link : chain) {
      link.op = cfg.allowed_ops[rng.uniform_index(cfg.allowed_ops.size())];
      link.severity = rng.uniform_int(1, cfg.severity);
    }
  }
  return plan;
}

Image apply_augmix_plan(const Image& img, const AugmixPlan& plan) {
  if (plan.weights.size() != plan.chains.size())
    throw ConfigError("augmix plan: weights/chains size mismatch");
  Image mix(img.h, img.w);
  for (size_t k = 0; k < plan.chains.size(); ++k) {
    Image chained = img;
    for (const auto& link : plan.chains[k])
      chained = apply_photometric_op(chained, link.op, link.severity);
    const double wk = plan.weights[k];
    for (size_t i = 0; i < mix.px.size(); ++i) mix.px[i] += wk * chained.px[i];
  }
  Image out(img.h, img.w);
  for (size_t i = 0; i < out.px.size(); ++i)
    out.px[i] = plan.m * img.px[i] + (1.0 - plan.m) * mix.px[i];
  clip01(out);
  return out;
}

Image augmix(const Image& img, const AugmixConfig& cfg, Rng& rng) {
  return apply_augmix_plan(img, sample_augmix_plan(cfg, rng));
}

Image fourier_amplitude_blend(const Image& img, const Image& donor, double lambda_blend) {
  if (!img.same_shape(donor)) throw DimensionError("fourier_amplitude_blend: shape mismatch");
  if (!(lambda_blend >= 0.0 && lambda_blend <= 1.0))
    throw RangeError("fourier_amplitude_blend: lambda must be in [0,1]");
  const int h = img.h, w = img.w;
  const size_t n = static_cast<size_t>(h) * w;
  Image out(h, w);
  std::vector<double> re(n), im(n), dre(n), dim(n);
  for (int c = 0; c < 3; ++c) {
    for (size_t i = 0; i < n; ++i) {
      re[i] = img.px[static_cast<size_t>(c) * n + i];
      im[i] = 0.0;
      dre[i] = donor.px[static_cast<size_t>(c) * n + i];
      dim[i] = 0.0;
    }
    fft::dft2d(re, im, h, w, false);
    fft::dft2d(dre, dim, h, w, false);
    for (size_t i = 0; i < n; ++i) {
      const double amp = std::hypot(re[i], im[i]);
      const double damp = std::hypot(dre[i], dim[i]);
      const double blended = (1.0 - lambda_blend) * amp + lambda_blend * damp;
      if (amp > 1e-300) {
        const double scale = blended / amp;
        re[i] *= scale;
        im[i] *= scale;
      } else {
        re[i] = blended;  // phase undefined at zero amplitude; use phase 0
        im[i] = 0.0;
      }
    }
    fft::dft2d(re, im, h, w, true);
    for (size_t i = 0; i < n; ++i) out.px[static_cast<size_t>(c) * n + i] = re[i];
  }
  clip01(out);
  return out;
}

}  // namespace cauge::intervene
