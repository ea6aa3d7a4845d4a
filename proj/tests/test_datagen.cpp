#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cauge/datagen.hpp"

using namespace cauge;
using namespace cauge::datagen;
namespace fs = std::filesystem;

namespace {

std::string tmp_dir(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("cauge_datagen_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

DomainSpec wide_domain(const std::string& name, uint64_t seed) {
  DomainSpec d;
  d.name = name;
  d.seed = seed;
  d.illumination = {0.7, 1.3};
  d.tint = {-0.1, 0.1};
  d.blur_sigma = {0.0, 1.0};
  d.noise_sigma = {0.0, 0.04};
  d.background_level = {0.2, 0.8};
  return d;
}

// centroid of darkness inside a window around an expected center
std::array<double, 2> dark_centroid(const Image& img, double cx, double cy, double radius) {
  double sw = 0.0, sx = 0.0, sy = 0.0;
  const auto luma = luminance(img);
  for (int y = 0; y < img.h; ++y)
    for (int x = 0; x < img.w; ++x) {
      const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
      if (dx * dx + dy * dy > radius * radius) continue;
      const double w = 1.0 - luma[static_cast<size_t>(y) * img.w + x];
      sw += w;
      sx += w * (x + 0.5);
      sy += w * (y + 0.5);
    }
  return {sx / sw, sy / sw};
}

}  // namespace

TEST_CASE("gaze_to_iris_offset matches the closed form") {
  const auto zero = gaze_to_iris_offset({0.0, 0.0}, 10.0);
  CHECK(zero[0] == doctest::Approx(0.0));
  CHECK(zero[1] == doctest::Approx(0.0));

  const auto yaw_only = gaze_to_iris_offset({0.0, M_PI / 6.0}, 10.0);
  CHECK(yaw_only[0] == doctest::Approx(5.0));  // 10*sin(pi/6)*cos(0)
  CHECK(yaw_only[1] == doctest::Approx(0.0));

  const auto pitch_only = gaze_to_iris_offset({M_PI / 6.0, 0.0}, 10.0);
  CHECK(pitch_only[0] == doctest::Approx(0.0));
  CHECK(pitch_only[1] == doctest::Approx(-5.0));  // -10*sin(pi/6)
}

TEST_CASE("gaze_to_iris_offset stays within the eye radius") {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const GazeLabel g{rng.uniform(-kGazeMax, kGazeMax), rng.uniform(-kGazeMax, kGazeMax)};
    const auto off = gaze_to_iris_offset(g, 7.5);
    CHECK(std::hypot(off[0], off[1]) <= 7.5 + 1e-12);
  }
}

TEST_CASE("out-of-range gaze and bad radius are rejected") {
  CHECK_THROWS_AS(gaze_to_iris_offset({1.5, 0.0}, 10.0), RangeError);
  CHECK_THROWS_AS(gaze_to_iris_offset({0.0, -1.2}, 10.0), RangeError);
  CHECK_THROWS_AS(gaze_to_iris_offset({0.0, 0.0}, 0.0), RangeError);
  CHECK_THROWS_AS((GazeLabel{std::nan(""), 0.0}.validate()), RangeError);
}

TEST_CASE("render_sample is deterministic and in range") {
  NuisanceParams nu;
  nu.illumination = 0.9;
  nu.tint = {0.05, -0.02, 0.01};
  nu.blur_sigma = 0.8;
  nu.noise_sigma = 0.03;
  nu.background_level = 0.4;
  const GazeLabel g{0.2, -0.3};
  const Image a = render_sample(g, nu, 64, 77);
  const Image b = render_sample(g, nu, 64, 77);
  CHECK(a.px == b.px);  // bitwise
  CHECK(in_unit_range(a));
  const Image c = render_sample(g, nu, 64, 78);  // different noise stream
  CHECK(l2_distance(a, c) > 1e-6);
}

TEST_CASE("iris geometry depends only on gaze, not nuisance") {
  const GazeLabel g{0.25, 0.4};
  const EyeGeometry geom = render_geometry(g, 64);

  NuisanceParams nu1;  // neutral
  NuisanceParams nu2;
  nu2.illumination = 0.6;
  nu2.tint = {0.1, 0.05, -0.08};
  nu2.background_level = 0.8;

  // same gaze renders the iris disks at the same geometric centers
  const EyeGeometry geom2 = render_geometry(g, 64);
  CHECK(geom.left_iris == geom2.left_iris);
  CHECK(geom.right_iris == geom2.right_iris);

  // content-preserving nuisances do not move the dark centroid
  const Image img1 = render_sample(g, nu1, 64, 1);
  const Image img2 = render_sample(g, nu2, 64, 1);
  const auto c1 = dark_centroid(img1, geom.left_iris[0], geom.left_iris[1], 6.0);
  const auto c2 = dark_centroid(img2, geom.left_iris[0], geom.left_iris[1], 6.0);
  CHECK(std::abs(c1[0] - c2[0]) < 0.25);
  CHECK(std::abs(c1[1] - c2[1]) < 0.25);
  // and the centroid tracks the configured center
  CHECK(std::abs(c1[0] - geom.left_iris[0]) < 1.0);
  CHECK(std::abs(c1[1] - geom.left_iris[1]) < 1.0);
}

TEST_CASE("illumination scales the image mean") {
  NuisanceParams bright;  // identity pipeline
  NuisanceParams dim = bright;
  dim.illumination = 0.5;
  const GazeLabel g{0.1, 0.1};
  const Image a = render_sample(g, bright, 64, 3);
  const Image b = render_sample(g, dim, 64, 3);
  double mean_a = 0.0, mean_b = 0.0;
  for (double v : a.px) mean_a += v;
  for (double v : b.px) mean_b += v;
  CHECK(mean_b / mean_a == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("render size below 32 is rejected") {
  CHECK_THROWS_AS(render_sample({0, 0}, NuisanceParams{}, 16, 1), ConfigError);
}

TEST_CASE("generate_dataset tags and shares gaze labels across domains") {
  const auto one = generate_dataset({wide_domain("solo", 3)}, 5, 42, 32);
  CHECK(one.samples.size() == 5);
  for (const auto& s : one.samples) CHECK(s.domain == "solo");

  const auto multi = generate_dataset(
      {wide_domain("a", 1), wide_domain("b", 2), wide_domain("c", 3)}, 100, 777, 32);
  REQUIRE(multi.samples.size() == 300);
  for (int i = 0; i < 100; ++i) {
    const auto& ga = multi.samples[static_cast<size_t>(i)].label;
    const auto& gb = multi.samples[static_cast<size_t>(100 + i)].label;
    const auto& gc = multi.samples[static_cast<size_t>(200 + i)].label;
    CHECK(ga.pitch == gb.pitch);
    CHECK(ga.yaw == gc.yaw);
  }
}

TEST_CASE("duplicate domain names and bad counts are rejected") {
  CHECK_THROWS_AS(generate_dataset({wide_domain("x", 1), wide_domain("x", 2)}, 3, 1, 32),
                  ConfigError);
  CHECK_THROWS_AS(generate_dataset({wide_domain("x", 1)}, 0, 1, 32), ConfigError);
}

TEST_CASE("gaze sampling covers at least 90% of the configured range") {
  const auto labels = sample_gaze_labels(1000, 4242);
  double pmin = 1e9, pmax = -1e9, ymin = 1e9, ymax = -1e9;
  for (const auto& g : labels) {
    pmin = std::min(pmin, g.pitch);
    pmax = std::max(pmax, g.pitch);
    ymin = std::min(ymin, g.yaw);
    ymax = std::max(ymax, g.yaw);
  }
  CHECK(pmax - pmin >= 0.9 * 2.0 * kGazeMax);
  CHECK(ymax - ymin >= 0.9 * 2.0 * kGazeMax);
}

TEST_CASE("dataset write/read round-trip") {
  const std::string dir = tmp_dir("roundtrip");
  const auto ds = generate_dataset({wide_domain("rt", 9)}, 10, 5, 32);
  datagen::write_dataset(ds, dir);
  const auto back = read_dataset(dir);
  REQUIRE(back.samples.size() == 10);
  for (size_t i = 0; i < 10; ++i) {
    CHECK(back.samples[i].label.pitch == ds.samples[i].label.pitch);  // exact
    CHECK(back.samples[i].label.yaw == ds.samples[i].label.yaw);
    CHECK(back.samples[i].domain == ds.samples[i].domain);
    double max_px_err = 0.0;
    for (size_t k = 0; k < back.samples[i].image.px.size(); ++k)
      max_px_err = std::max(max_px_err,
                            std::abs(back.samples[i].image.px[k] - ds.samples[i].image.px[k]));
    CHECK(max_px_err <= 1.0 / 255.0);
  }
  fs::remove_all(dir);
}

TEST_CASE("regenerating with the same seeds is byte-identical") {
  const std::string d1 = tmp_dir("gen1");
  const std::string d2 = tmp_dir("gen2");
  datagen::write_dataset(generate_dataset({wide_domain("m", 21)}, 8, 13, 32), d1);
  datagen::write_dataset(generate_dataset({wide_domain("m", 21)}, 8, 13, 32), d2);
  CHECK(slurp(d1 + "/manifest.jsonl") == slurp(d2 + "/manifest.jsonl"));
  CHECK(slurp(d1 + "/img/m_000003.ppm") == slurp(d2 + "/img/m_000003.ppm"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("missing image file fails with the offending name") {
  const std::string dir = tmp_dir("missing");
  datagen::write_dataset(generate_dataset({wide_domain("z", 4)}, 3, 2, 32), dir);
  fs::remove(fs::path(dir) / "img" / "z_000001.ppm");
  try {
    read_dataset(dir);
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("z_000001.ppm") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("empty dataset round-trips as empty") {
  const std::string dir = tmp_dir("empty");
  Dataset empty;
  datagen::write_dataset(empty, dir);
  const auto back = read_dataset(dir);
  CHECK(back.samples.empty());
  fs::remove_all(dir);
}
