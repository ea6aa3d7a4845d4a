#include <doctest.h>

#include <cmath>
#include <complex>
#include <set>
#include <vector>

#include "cauge/datagen.hpp"
#include "cauge/dft.hpp"
#include "cauge/intervene.hpp"

using namespace cauge;
using namespace cauge::intervene;

namespace {

Image ramp_image(int h, int w) {
  Image img(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        img.at(c, y, x) = static_cast<double>(y * w + x) / (h * w - 1);
  return img;
}

Image random_image(int h, int w, uint64_t seed) {
  Rng rng(seed);
  Image img(h, w);
  for (auto& v : img.px) v = rng.uniform();
  return img;
}

Image rendered_eye(uint64_t seed) {
  datagen::NuisanceParams nu;
  nu.background_level = 0.5;
  Rng rng(seed);
  const datagen::GazeLabel g{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
  return datagen::render_sample(g, nu, 32, seed);
}

int distinct_levels(const Image& img, int channel) {
  std::set<long> levels;
  const size_t n = static_cast<size_t>(img.h) * img.w;
  for (size_t i = 0; i < n; ++i)
    levels.insert(std::lround(img.px[static_cast<size_t>(channel) * n + i] * 1e9));
  return static_cast<int>(levels.size());
}

// direct O(n^2 per axis) reference DFT, independent of cauge::fft
void naive_dft2d(std::vector<std::complex<double>>& a, int h, int w, bool inverse) {
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> tmp(a.size());
  for (int y = 0; y < h; ++y)
    for (int k = 0; k < w; ++k) {
      std::complex<double> s{0, 0};
      for (int x = 0; x < w; ++x)
        s += a[static_cast<size_t>(y) * w + x] *
             std::polar(1.0, sign * 2.0 * M_PI * k * x / w);
      tmp[static_cast<size_t>(y) * w + k] = s;
    }
  for (int x = 0; x < w; ++x)
    for (int k = 0; k < h; ++k) {
      std::complex<double> s{0, 0};
      for (int y = 0; y < h; ++y)
        s += tmp[static_cast<size_t>(y) * w + x] *
             std::polar(1.0, sign * 2.0 * M_PI * k * y / h);
      a[static_cast<size_t>(k) * w + x] = s;
    }
  if (inverse)
    for (auto& v : a) v /= static_cast<double>(h) * w;
}

}  // namespace

TEST_CASE("neutral parameters are identities") {
  const Image img = rendered_eye(1);
  CHECK(apply_brightness(img, 1.0).px == img.px);
  CHECK(apply_contrast(img, 1.0).px == img.px);
  CHECK(apply_color(img, 1.0).px == img.px);
  CHECK(apply_sharpness(img, 1.0).px == img.px);
  CHECK(apply_solarize(img, 1.0).px == img.px);  // nothing exceeds the threshold
}

TEST_CASE("posterize to 1 bit leaves at most 2 levels per channel") {
  const Image out = apply_posterize(ramp_image(16, 16), 1);
  for (int c = 0; c < 3; ++c) CHECK(distinct_levels(out, c) <= 2);
  // and 8 bits is lossless on quantized data
  const Image q = apply_posterize(ramp_image(16, 16), 8);
  const Image qq = apply_posterize(q, 8);
  CHECK(q.px == qq.px);
}

TEST_CASE("severity mappings are monotone") {
  const Image img = rendered_eye(2);
  double prev_mean = 1e9;
  for (int s = 1; s <= 10; ++s) {
    const Image out = apply_photometric_op(img, PhotoOp::Brightness, s);
    double mean = 0.0;
    for (double v : out.px) mean += v;
    CHECK(mean < prev_mean);  // darker with severity
    prev_mean = mean;
  }
  int prev_levels = 1 << 30;
  for (int s = 1; s <= 10; ++s) {
    const Image out = apply_photometric_op(ramp_image(16, 16), PhotoOp::Posterize, s);
    const int levels = distinct_levels(out, 0);
    CHECK(levels <= prev_levels);
    prev_levels = levels;
  }
}

TEST_CASE("autocontrast stretches to full range and equalize keeps range") {
  Image img = rendered_eye(3);
  for (auto& v : img.px) v = 0.3 + 0.2 * v;  // compress
  const Image ac = apply_autocontrast(img);
  CHECK(in_unit_range(ac));
  double lo = 1e9, hi = -1e9;
  const size_t n = static_cast<size_t>(ac.h) * ac.w;
  for (size_t i = 0; i < n; ++i) {
    lo = std::min(lo, ac.px[i]);
    hi = std::max(hi, ac.px[i]);
  }
  CHECK(lo == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(in_unit_range(apply_equalize(img)));
}

TEST_CASE("unknown and geometric op names are rejected") {
  for (const char* bad : {"shear", "shearX", "translate", "rotate", "warp", "zoom"})
    CHECK_THROWS_AS(op_from_name(bad), ConfigError);
  for (int i = 0; i < kNumPhotoOps; ++i)
    CHECK(op_from_name(op_name(static_cast<PhotoOp>(i))) == static_cast<PhotoOp>(i));
}

TEST_CASE("augmix config validation") {
  AugmixConfig bad;
  bad.width = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = AugmixConfig{};
  bad.severity = 11;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = AugmixConfig{};
  bad.dirichlet_alpha = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("augmix plan endpoints") {
  const Image img = rendered_eye(4);
  AugmixConfig cfg;
  Rng rng(99);

  SUBCASE("m = 1 returns the input exactly") {
    AugmixPlan plan = sample_augmix_plan(cfg, rng);
    plan.m = 1.0;
    CHECK(apply_augmix_plan(img, plan).px == img.px);
  }

  SUBCASE("w = (1,0,0), m = 0, identity chain returns the input") {
    // autocontrast is the identity on a channel that already spans [0,1]
    Image full = img;
    const size_t n = static_cast<size_t>(full.h) * full.w;
    for (int c = 0; c < 3; ++c) {
      full.px[static_cast<size_t>(c) * n] = 0.0;
      full.px[static_cast<size_t>(c) * n + 1] = 1.0;
    }
    AugmixPlan plan;
    plan.m = 0.0;
    plan.weights = {1.0, 0.0, 0.0};
    plan.chains = {{{PhotoOp::Autocontrast, 3}}, {{PhotoOp::Brightness, 5}},
                   {{PhotoOp::Solarize, 7}}};
    const Image out = apply_augmix_plan(full, plan);
    double max_err = 0.0;
    for (size_t i = 0; i < out.px.size(); ++i)
      max_err = std::max(max_err, std::abs(out.px[i] - full.px[i]));
    CHECK(max_err < 1e-12);
  }
}

TEST_CASE("augmix output range, determinism, and non-degeneracy") {
  const Image img = rendered_eye(5);
  AugmixConfig cfg;
  int changed = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Rng rng(derive_seed(1000, "augmix-trial", static_cast<uint64_t>(trial)));
    const Image out = augmix(img, cfg, rng);
    CHECK(in_unit_range(out));
    if (l2_distance(out, img) > 1e-6) ++changed;
  }
  CHECK(changed >= 198);  // >= 99%

  Rng r1(777), r2(777);
  CHECK(augmix(img, cfg, r1).px == augmix(img, cfg, r2).px);
}

TEST_CASE("dft2d matches the direct transform") {
  for (const auto [h, w] : {std::array<int, 2>{8, 8}, {16, 16}, {12, 10}, {7, 16}}) {
    const Image img = random_image(h, w, 31);
    const size_t n = static_cast<size_t>(h) * w;
    std::vector<double> re(n), im(n, 0.0);
    for (size_t i = 0; i < n; ++i) re[i] = img.px[i];
    std::vector<std::complex<double>> ref(n);
    for (size_t i = 0; i < n; ++i) ref[i] = {img.px[i], 0.0};

    fft::dft2d(re, im, h, w, false);
    naive_dft2d(ref, h, w, false);
    double max_err = 0.0;
    for (size_t i = 0; i < n; ++i)
      max_err = std::max({max_err, std::abs(re[i] - ref[i].real()),
                          std::abs(im[i] - ref[i].imag())});
    CHECK(max_err < 1e-9);

    fft::dft2d(re, im, h, w, true);  // round-trip
    double rt_err = 0.0;
    for (size_t i = 0; i < n; ++i)
      rt_err = std::max({rt_err, std::abs(re[i] - img.px[i]), std::abs(im[i])});
    CHECK(rt_err < 1e-12);
  }
}

TEST_CASE("fourier_amplitude_blend endpoints and DC case") {
  const Image img = rendered_eye(6);
  const Image donor = rendered_eye(7);

  SUBCASE("lambda = 0 is the identity within transform tolerance") {
    const Image out = fourier_amplitude_blend(img, donor, 0.0);
    double max_err = 0.0;
    for (size_t i = 0; i < out.px.size(); ++i)
      max_err = std::max(max_err, std::abs(out.px[i] - img.px[i]));
    CHECK(max_err < 1e-6);
  }

  SUBCASE("lambda = 1 with donor = image is the identity") {
    const Image out = fourier_amplitude_blend(img, img, 1.0);
    double max_err = 0.0;
    for (size_t i = 0; i < out.px.size(); ++i)
      max_err = std::max(max_err, std::abs(out.px[i] - img.px[i]));
    CHECK(max_err < 1e-6);
  }

  SUBCASE("constant images blend their DC levels") {
    Image a(32, 32), b(32, 32);
    for (auto& v : a.px) v = 0.2;
    for (auto& v : b.px) v = 0.8;
    const Image out = fourier_amplitude_blend(a, b, 0.5);
    for (double v : out.px) CHECK(v == doctest::Approx(0.5).epsilon(1e-6));
  }

  SUBCASE("shape mismatch is rejected") {
    CHECK_THROWS_AS(fourier_amplitude_blend(img, Image(16, 16), 0.5), DimensionError);
    CHECK_THROWS_AS(fourier_amplitude_blend(img, donor, 1.5), RangeError);
  }
}

TEST_CASE("photometric ops preserve range on random images") {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Image img = random_image(16, 16, 100 + static_cast<uint64_t>(trial));
    const auto op = static_cast<PhotoOp>(rng.uniform_index(kNumPhotoOps));
    const int severity = rng.uniform_int(1, 10);
    const Image out = apply_photometric_op(img, op, severity);
    CHECK(in_unit_range(out));
    CHECK(out.h == img.h);
    CHECK(out.w == img.w);
  }
}
