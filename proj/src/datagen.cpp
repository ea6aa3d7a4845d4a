#include "cauge/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "cauge/parallel.hpp"

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace cauge::datagen {

namespace {

// Manifest floats are printed in scientific notation with 17 significant
// digits so labels round-trip exactly and files are byte-stable.
std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.16e", v);
  return buf;
}

void check_interval(const Interval& iv, double lo, double hi, const char* field) {
  if (!(iv.lo <= iv.hi) || iv.lo < lo || iv.hi > hi)
    throw ConfigError(std::string("DomainSpec: ") + field + " interval [" +
                      std::to_string(iv.lo) + ", " + std::to_string(iv.hi) +
                      "] outside allowed [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

// Scene constants, in units of the image size.
constexpr double kEyeCxLeft = 0.30;
constexpr double kEyeCxRight = 0.70;
constexpr double kEyeCy = 0.50;
constexpr double kScleraAx = 0.16;
constexpr double kScleraAy = 0.145;
constexpr double kEyeRadius = 0.085;  // gaze lever arm
constexpr double kIrisRadius = 0.075;
constexpr double kPupilRadius = 0.032;

constexpr double kScleraColor[3] = {0.88, 0.87, 0.85};
constexpr double kIrisColor[3] = {0.16, 0.34, 0.58};
constexpr double kPupilColor[3] = {0.04, 0.04, 0.04};

// antialiased coverage from an approximate signed pixel distance
inline double coverage(double signed_dist) {
  return std::clamp(0.5 - signed_dist, 0.0, 1.0);
}

inline double ellipse_coverage(double dx, double dy, double ax, double ay) {
  const double e = std::sqrt((dx * dx) / (ax * ax) + (dy * dy) / (ay * ay));
  return coverage((e - 1.0) * std::min(ax, ay));
}

inline double disk_coverage(double dx, double dy, double r) {
  return coverage(std::sqrt(dx * dx + dy * dy) - r);
}

}  // namespace

bool GazeLabel::in_range() const {
  return std::isfinite(pitch) && std::isfinite(yaw) && std::abs(pitch) <= kGazeMax &&
         std::abs(yaw) <= kGazeMax;
}

void GazeLabel::validate() const {
  if (!in_range())
    throw RangeError("gaze (" + std::to_string(pitch) + ", " + std::to_string(yaw) +
                     ") outside [-pi/3, pi/3]");
}

void NuisanceParams::validate() const {
  auto bad = [](double v, double lo, double hi) { return !(v >= lo && v <= hi); };
  if (bad(illumination, 0.3, 1.7)) throw RangeError("illumination outside [0.3, 1.7]");
  for (double t : tint)
    if (bad(t, -0.25, 0.25)) throw RangeError("tint outside [-0.25, 0.25]");
  if (bad(blur_sigma, 0.0, 2.0)) throw RangeError("blur_sigma outside [0, 2]");
  if (bad(noise_sigma, 0.0, 0.08)) throw RangeError("noise_sigma outside [0, 0.08]");
  if (bad(background_level, 0.0, 1.0)) throw RangeError("background_level outside [0, 1]");
}

void DomainSpec::validate() const {
  if (name.empty()) throw ConfigError("DomainSpec: empty name");
  check_interval(illumination, 0.3, 1.7, "illumination");
  check_interval(tint, -0.25, 0.25, "tint");
  check_interval(blur_sigma, 0.0, 2.0, "blur_sigma");
  check_interval(noise_sigma, 0.0, 0.08, "noise_sigma");
  check_interval(background_level, 0.0, 1.0, "background_level");
}

NuisanceParams DomainSpec::sample_nuisance(uint64_t sample_index) const {
  Rng rng(derive_seed(seed, "nuisance", sample_index));
  NuisanceParams p;
  p.illumination = rng.uniform(illumination.lo, illumination.hi);
  for (int c = 0; c < 3; ++c) p.tint[static_cast<size_t>(c)] = rng.uniform(tint.lo, tint.hi);
  p.blur_sigma = rng.uniform(blur_sigma.lo, blur_sigma.hi);
  p.noise_sigma = rng.uniform(noise_sigma.lo, noise_sigma.hi);
  p.background_level = rng.uniform(background_level.lo, background_level.hi);
  return p;
}

std::array<double, 2> gaze_to_iris_offset(const GazeLabel& gaze, double eye_radius) {
  gaze.validate();
  if (!(eye_radius > 0.0)) throw RangeError("eye_radius must be > 0");
  return {eye_radius * std::sin(gaze.yaw) * std::cos(gaze.pitch),
          -eye_radius * std::sin(gaze.pitch)};
}

EyeGeometry render_geometry(const GazeLabel& gaze, int size) {
  const auto off = gaze_to_iris_offset(gaze, kEyeRadius * size);
  EyeGeometry g;
  g.left_iris = {kEyeCxLeft * size + off[0], kEyeCy * size + off[1]};
  g.right_iris = {kEyeCxRight * size + off[0], kEyeCy * size + off[1]};
  g.iris_radius = kIrisRadius * size;
  g.pupil_radius = kPupilRadius * size;
  return g;
}

Image render_sample(const GazeLabel& gaze, const NuisanceParams& nuisance, int size,
                    uint64_t rng_seed) {
  gaze.validate();
  nuisance.validate();
  if (size < 32) throw ConfigError("render size must be >= 32");

  const EyeGeometry geom = render_geometry(gaze, size);
  const double cx[2] = {kEyeCxLeft * size, kEyeCxRight * size};
  const double cy = kEyeCy * size;
  const double ax = kScleraAx * size, ay = kScleraAy * size;

  Image img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double col[3] = {nuisance.background_level, nuisance.background_level,
                       nuisance.background_level};
      for (int e = 0; e < 2; ++e) {
        const double sc = ellipse_coverage(px - cx[e], py - cy, ax, ay);
        if (sc <= 0.0) continue;
        for (int c = 0; c < 3; ++c) col[c] = col[c] + sc * (kScleraColor[c] - col[c]);
        const double ix = e == 0 ? geom.left_iris[0] : geom.right_iris[0];
        const double iy = e == 0 ? geom.left_iris[1] : geom.right_iris[1];
        // iris clipped by the sclera boundary (socket occlusion)
        const double ic = sc * disk_coverage(px - ix, py - iy, geom.iris_radius);
        if (ic > 0.0)
          for (int c = 0; c < 3; ++c) col[c] = col[c] + ic * (kIrisColor[c] - col[c]);
        const double pc = sc * disk_coverage(px - ix, py - iy, geom.pupil_radius);
        if (pc > 0.0)
          for (int c = 0; c < 3; ++c) col[c] = col[c] + pc * (kPupilColor[c] - col[c]);
      }
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = col[c];
    }
  }

  // nuisance pipeline, canonical order
  for (auto& v : img.px) v *= nuisance.illumination;
  {
    const size_t n = static_cast<size_t>(size) * size;
    for (int c = 0; c < 3; ++c) {
      const double t = nuisance.tint[static_cast<size_t>(c)];
      for (size_t i = 0; i < n; ++i) img.px[static_cast<size_t>(c) * n + i] += t;
    }
  }
  if (nuisance.blur_sigma > 0.0) img = gaussian_blur(img, nuisance.blur_sigma);
  if (nuisance.noise_sigma > 0.0) {
    Rng rng(derive_seed(rng_seed, "noise"));
    for (auto& v : img.px) v += nuisance.noise_sigma * rng.normal();
  }
  clip01(img);
  return img;
}

std::vector<GazeLabel> sample_gaze_labels(int n, uint64_t gaze_seed) {
  Rng rng(derive_seed(gaze_seed, "gaze"));
  std::vector<GazeLabel> labels(static_cast<size_t>(n));
  for (auto& g : labels) {
    g.pitch = rng.uniform(-kGazeMax, kGazeMax);
    g.yaw = rng.uniform(-kGazeMax, kGazeMax);
  }
  return labels;
}

Dataset generate_dataset(const std::vector<DomainSpec>& domains, int n_per_domain,
                         uint64_t gaze_sampler_seed, int image_size) {
  if (n_per_domain < 1) throw ConfigError("generate_dataset: n_per_domain must be >= 1");
  std::set<std::string> names;
  for (const auto& d : domains) {
    d.validate();
    if (!names.insert(d.name).second)
      throw ConfigError("generate_dataset: duplicate domain name '" + d.name + "'");
  }

  // one gaze list shared by every domain
  const auto gaze = sample_gaze_labels(n_per_domain, gaze_sampler_seed);

  Dataset ds;
  ds.image_size = image_size;
  ds.samples.resize(domains.size() * static_cast<size_t>(n_per_domain));
  const int64_t total = static_cast<int64_t>(ds.samples.size());
  parallel_for(0, total, 8, [&](int64_t lo, int64_t hi) {
    for (int64_t idx = lo; idx < hi; ++idx) {
      const auto& dom = domains[static_cast<size_t>(idx) / n_per_domain];
      const int64_t i = idx % n_per_domain;
      ImageSample& s = ds.samples[static_cast<size_t>(idx)];
      s.label = gaze[static_cast<size_t>(i)];
      s.domain = dom.name;
      s.index = i;
      s.nuisance = dom.sample_nuisance(static_cast<uint64_t>(i));
      s.image = render_sample(s.label, s.nuisance, image_size,
                              derive_seed(dom.seed, "render", static_cast<uint64_t>(i)));
    }
  });
  return ds;
}

std::string write_dataset(const Dataset& ds, const std::string& directory) {
  fs::create_directories(fs::path(directory) / "img");
  const std::string manifest_path = (fs::path(directory) / "manifest.jsonl").string();
  std::ofstream mf(manifest_path, std::ios::binary);
  if (!mf) throw IoError("cannot open for writing: " + manifest_path);

  for (const auto& s : ds.samples) {
    char name[128];
    std::snprintf(name, sizeof(name), "img/%s_%06lld.ppm", s.domain.c_str(),
                  static_cast<long long>(s.index));
    write_ppm(s.image, (fs::path(directory) / name).string());
    mf << "{\"image\":\"" << name << "\",\"pitch\":" << fmt_double(s.label.pitch)
       << ",\"yaw\":" << fmt_double(s.label.yaw) << ",\"domain\":\"" << s.domain
       << "\",\"index\":" << s.index << ",\"nuisance\":{\"illumination\":"
       << fmt_double(s.nuisance.illumination) << ",\"tint\":["
       << fmt_double(s.nuisance.tint[0]) << "," << fmt_double(s.nuisance.tint[1]) << ","
       << fmt_double(s.nuisance.tint[2]) << "],\"blur_sigma\":"
       << fmt_double(s.nuisance.blur_sigma) << ",\"noise_sigma\":"
       << fmt_double(s.nuisance.noise_sigma) << ",\"background_level\":"
       << fmt_double(s.nuisance.background_level) << "}}\n";
  }
  if (!mf) throw IoError("write failed: " + manifest_path);
  return manifest_path;
}

Dataset read_dataset(const std::string& directory) {
  const fs::path dir(directory);
  const std::string manifest_path = (dir / "manifest.jsonl").string();
  std::ifstream mf(manifest_path, std::ios::binary);
  if (!mf) throw IoError("missing manifest: " + manifest_path);

  Dataset ds;
  std::string line;
  int lineno = 0;
  while (std::getline(mf, line)) {
    ++lineno;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    ImageSample s;
    try {
      const std::string img_rel = rec.at("image").get<std::string>();
      const fs::path img_path = dir / img_rel;
      if (!fs::exists(img_path))
        throw IoError("manifest line " + std::to_string(lineno) + ": missing image file " +
                      img_rel);
      s.image = read_ppm(img_path.string());
      s.label.pitch = rec.at("pitch").get<double>();
      s.label.yaw = rec.at("yaw").get<double>();
      s.domain = rec.at("domain").get<std::string>();
      s.index = rec.at("index").get<int64_t>();
      const auto& nu = rec.at("nuisance");
      s.nuisance.illumination = nu.at("illumination").get<double>();
      for (int c = 0; c < 3; ++c)
        s.nuisance.tint[static_cast<size_t>(c)] = nu.at("tint").at(c).get<double>();
      s.nuisance.blur_sigma = nu.at("blur_sigma").get<double>();
      s.nuisance.noise_sigma = nu.at("noise_sigma").get<double>();
      s.nuisance.background_level = nu.at("background_level").get<double>();
    } catch (const json::exception& e) {
      throw IoError("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (ds.image_size == 0) ds.image_size = s.image.h;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

}  // namespace cauge::datagen
