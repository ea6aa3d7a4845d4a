#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cauge/image.hpp"
#include "cauge/rng.hpp"

namespace cauge::datagen {

inline constexpr double kGazeMax = M_PI / 3.0;

// (pitch, yaw) in radians, both in [-pi/3, pi/3]
struct GazeLabel {
  double pitch = 0.0;
  double yaw = 0.0;

  bool in_range() const;
  void validate() const;  // throws RangeError
};

// Non-causal factors. Bounds are the sampling universe; domain recipes pick
// sub-intervals of these.
struct NuisanceParams {
  double illumination = 1.0;             // [0.3, 1.7] multiplier
  std::array<double, 3> tint = {0, 0, 0};  // per-channel offset, [-0.25, 0.25]
  double blur_sigma = 0.0;               // [0, 2] px
  double noise_sigma = 0.0;              // [0, 0.08] pixel std
  double background_level = 0.5;         // [0, 1]

  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Named sampling recipe for one synthetic domain.
struct DomainSpec {
  std::string name;
  uint64_t seed = 0;
  Interval illumination{1.0, 1.0};
  Interval tint{0.0, 0.0};  // applied independently per channel
  Interval blur_sigma{0.0, 0.0};
  Interval noise_sigma{0.0, 0.0};
  Interval background_level{0.5, 0.5};

  void validate() const;
  NuisanceParams sample_nuisance(uint64_t sample_index) const;  // pure in (seed, index)
};

struct ImageSample {
  Image image;
  GazeLabel label;
  std::string domain;
  int64_t index = 0;
  NuisanceParams nuisance;
};

struct Dataset {
  std::vector<ImageSample> samples;
  int image_size = 0;

  size_t size() const { return samples.size(); }
};

// Geometry of the causal mechanism: where gaze puts the iris centers.
struct EyeGeometry {
  std::array<double, 2> left_iris;   // (x, y) pixels
  std::array<double, 2> right_iris;
  double iris_radius;
  double pupil_radius;
};

// dx = r*sin(yaw)*cos(pitch), dy = -r*sin(pitch); |offset| <= r
std::array<double, 2> gaze_to_iris_offset(const GazeLabel& gaze, double eye_radius);

EyeGeometry render_geometry(const GazeLabel& gaze, int size);

// Deterministic renderer: two sclera ellipses, iris disks displaced by
// gaze_to_iris_offset, pupil dots; nuisance applied after geometry in the
// fixed order illumination -> tint -> blur -> noise -> clip.
Image render_sample(const GazeLabel& gaze, const NuisanceParams& nuisance, int size,
                    uint64_t rng_seed);

std::vector<GazeLabel> sample_gaze_labels(int n, uint64_t gaze_seed);

Dataset generate_dataset(const std::vector<DomainSpec>& domains, int n_per_domain,
                         uint64_t gaze_sampler_seed, int image_size = 64);

// manifest.jsonl + 8-bit PPM files; returns the manifest path
std::string write_dataset(const Dataset& ds, const std::string& directory);
Dataset read_dataset(const std::string& directory);

}  // namespace cauge::datagen
