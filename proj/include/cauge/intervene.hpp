#pragma once

#include <string>
#include <vector>

#include "cauge/image.hpp"
#include "cauge/rng.hpp"

namespace cauge::intervene {

// Photometric operations only. Spatial warps (shear, translate, rotate)
// would move the iris and change the label, so they are excluded at the
// type level: this enum is the whole op universe.
enum class PhotoOp {
  Autocontrast,
  Equalize,
  Posterize,
  Solarize,
  Color,
  Contrast,
  Brightness,
  Sharpness,
};

inline constexpr int kNumPhotoOps = 8;

const char* op_name(PhotoOp op);
PhotoOp op_from_name(const std::string& name);  // ConfigError on unknown/geometric names

// ---- parameterized primitives (identity at the neutral parameter) ----
Image apply_brightness(const Image& img, double factor);   // out = factor*x; 1.0 = identity
Image apply_contrast(const Image& img, double factor);     // blend with mean luminance
Image apply_color(const Image& img, double factor);        // blend with per-pixel gray
Image apply_sharpness(const Image& img, double factor);    // blend with 3x3 smoothed
Image apply_solarize(const Image& img, double threshold);  // invert pixels > threshold
Image apply_posterize(const Image& img, int bits);         // keep `bits` of 8
Image apply_autocontrast(const Image& img);                // per-channel stretch
Image apply_equalize(const Image& img);                    // per-channel histogram eq.

// Severity (1..10) -> parameter mappings are frozen in intervene.cpp
// (kSeverity* constants); each is monotone and approaches identity as
// severity -> 0.
Image apply_photometric_op(const Image& img, PhotoOp op, int severity);
Image apply_photometric_op(const Image& img, const std::string& op_name, int severity);

struct AugmixConfig {
  int width = 3;      // parallel chains
  int max_depth = 3;  // ops per chain, depth ~ U{1..max_depth}
  int severity = 3;   // per-op severity ~ U{1..severity}
  double dirichlet_alpha = 1.0;
  double beta_alpha = 1.0;
  std::vector<PhotoOp> allowed_ops = {
      PhotoOp::Autocontrast, PhotoOp::Equalize,   PhotoOp::Posterize, PhotoOp::Solarize,
      PhotoOp::Color,        PhotoOp::Contrast,   PhotoOp::Brightness, PhotoOp::Sharpness,
  };

  void validate() const;
};

struct ChainOp {
  PhotoOp op;
  int severity;
};

// A fully sampled augmentation: out = m*x + (1-m)*sum_k w_k*chain_k(x).
struct AugmixPlan {
  double m = 0.0;
  std::vector<double> weights;
  std::vector<std::vector<ChainOp>> chains;
};

AugmixPlan sample_augmix_plan(const AugmixConfig& cfg, Rng& rng);
Image apply_augmix_plan(const Image& img, const AugmixPlan& plan);
Image augmix(const Image& img, const AugmixConfig& cfg, Rng& rng);

// Keeps the image's phase, blends amplitude spectra:
// |F_out| = (1-lambda)*|F(image)| + lambda*|F(donor)|.
Image fourier_amplitude_blend(const Image& img, const Image& donor, double lambda_blend);

}  // namespace cauge::intervene
