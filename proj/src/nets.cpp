#include "cauge/nets.hpp"

#include <cmath>

#include "cauge/rng.hpp"

namespace cauge::nets {

void NetConfig::validate() const {
  if (image_size < 16) throw ConfigError("network: image_size must be >= 16");
  if (trunk_channels.empty()) throw ConfigError("network: trunk_channels must be non-empty");
  for (int c : trunk_channels)
    if (c < 1) throw ConfigError("network: trunk channel widths must be >= 1");
  for (int c : trunk_channels)
    if (c % gn_groups != 0)
      throw ConfigError("network: trunk width " + std::to_string(c) +
                        " not divisible by gn_groups " + std::to_string(gn_groups));
  if (reduction_ratio < 1) throw ConfigError("network: reduction_ratio must be >= 1");
  if (feature_dim() % reduction_ratio != 0)
    throw ConfigError("network: feature dim " + std::to_string(feature_dim()) +
                      " not divisible by reduction ratio " + std::to_string(reduction_ratio));
  if (g_hidden < 1 || c_hidden < 1) throw ConfigError("network: head widths must be >= 1");
  for (double s : norm_std)
    if (!(s > 0.0)) throw ConfigError("network: norm_std entries must be > 0");
  // the trunk must not downsample to nothing
  int side = image_size;
  for (size_t i = 0; i < trunk_channels.size(); ++i) side = (side + 1) / 2;
  if (side < 1) throw ConfigError("network: too many trunk blocks for image size");
}

NetConfig NetConfig::desk(int image_size) {
  NetConfig c;
  c.preset = "desk";
  c.image_size = image_size;
  return c;
}

NetConfig NetConfig::paper() {
  NetConfig c;
  c.preset = "paper";
  c.image_size = 224;
  c.trunk_channels = {64, 128, 256, 512};
  c.gn_groups = 16;
  c.g_hidden = 256;
  c.c_hidden = 256;
  c.norm_mean = {0.485, 0.456, 0.406};
  c.norm_std = {0.229, 0.224, 0.225};
  return c;
}

const char* owner_name(Owner o) {
  switch (o) {
    case Owner::F: return "F";
    case Owner::AL: return "AL";
    case Owner::G: return "G";
    case Owner::C: return "C";
  }
  return "?";
}

int ModelParams::find(const std::string& name) const {
  for (size_t i = 0; i < items.size(); ++i)
    if (items[i].name == name) return static_cast<int>(i);
  return -1;
}

std::vector<int> ModelParams::owned_by(Owner o) const {
  std::vector<int> out;
  for (size_t i = 0; i < items.size(); ++i)
    if (items[i].owner == o) out.push_back(static_cast<int>(i));
  return out;
}

std::vector<int> ModelParams::owned_by_main() const {
  std::vector<int> out;
  for (size_t i = 0; i < items.size(); ++i)
    if (items[i].owner != Owner::C) out.push_back(static_cast<int>(i));
  return out;
}

uint64_t ModelParams::hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  for (const auto& p : items) {
    h = fnv1a_bytes(p.name.data(), p.name.size(), h);
    h = tensor_hash(p.value, h);
  }
  return h;
}

int64_t ModelParams::total_elements() const {
  int64_t n = 0;
  for (const auto& p : items) n += p.value.numel();
  return n;
}

Model::Model(NetConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  auto push = [&](const std::string& name, Owner o, std::vector<int> shape) {
    params_.items.push_back({name, o, Tensor(std::move(shape))});
  };
  int in_ch = 3;
  for (size_t i = 0; i < cfg_.trunk_channels.size(); ++i) {
    const int out_ch = cfg_.trunk_channels[i];
    const std::string blk = "F.block" + std::to_string(i);
    push(blk + ".conv.w", Owner::F, {out_ch, in_ch, 3, 3});
    push(blk + ".conv.b", Owner::F, {out_ch});
    push(blk + ".gn.gamma", Owner::F, {out_ch});
    push(blk + ".gn.beta", Owner::F, {out_ch});
    in_ch = out_ch;
  }
  const int n = cfg_.feature_dim();
  const int nr = n / cfg_.reduction_ratio;
  push("AL.fc1.w", Owner::AL, {nr, n});
  push("AL.fc1.b", Owner::AL, {nr});
  push("AL.fc2.w", Owner::AL, {n, nr});
  push("AL.fc2.b", Owner::AL, {n});
  push("G.fc1.w", Owner::G, {cfg_.g_hidden, n});
  push("G.fc1.b", Owner::G, {cfg_.g_hidden});
  push("G.fc2.w", Owner::G, {2, cfg_.g_hidden});
  push("G.fc2.b", Owner::G, {2});
  push("C.fc1.w", Owner::C, {cfg_.c_hidden, n});
  push("C.fc1.b", Owner::C, {cfg_.c_hidden});
  push("C.fc2.w", Owner::C, {1, cfg_.c_hidden});
  push("C.fc2.b", Owner::C, {1});
}

void Model::init_weights(uint64_t seed) {
  for (size_t i = 0; i < params_.items.size(); ++i) {
    Param& p = params_.items[i];
    Rng rng(derive_seed(seed, "init", i));
    const auto& sh = p.value.shape();
    if (p.name.ends_with(".gn.gamma")) {
      p.value.fill(1.0);
    } else if (p.name.ends_with(".b") || p.name.ends_with(".beta")) {
      p.value.fill(0.0);  // zero biases (final G bias included)
    } else {
      int64_t fan_in = 1;
      for (size_t d = 1; d < sh.size(); ++d) fan_in *= sh[d];
      const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (int64_t k = 0; k < p.value.numel(); ++k) p.value[k] = std * rng.normal();
    }
  }
}

Bound Model::bind(ad::Tape& t, std::initializer_list<Owner> trainable) const {
  Bound b;
  b.ids.reserve(params_.items.size());
  for (const auto& p : params_.items) {
    bool grad = false;
    for (Owner o : trainable) grad = grad || (o == p.owner);
    b.ids.push_back(t.leaf(p.value, grad));
  }
  return b;
}

int Model::param_id(const std::string& name) const {
  const int i = params_.find(name);
  if (i < 0) throw StateError("model parameter not found: " + name);
  return i;
}

ad::VarId Model::feature_extract(ad::Tape& t, const Bound& b, ad::VarId images) const {
  ad::VarId x = t.normalize_channels(images, cfg_.norm_mean, cfg_.norm_std);
  for (size_t i = 0; i < cfg_.trunk_channels.size(); ++i) {
    const std::string blk = "F.block" + std::to_string(i);
    x = t.conv2d(x, b.ids[static_cast<size_t>(param_id(blk + ".conv.w"))],
                 b.ids[static_cast<size_t>(param_id(blk + ".conv.b"))], /*stride=*/2, /*pad=*/1);
    x = t.group_norm(x, b.ids[static_cast<size_t>(param_id(blk + ".gn.gamma"))],
                     b.ids[static_cast<size_t>(param_id(blk + ".gn.beta"))], cfg_.gn_groups,
                     1e-5);
    x = t.relu(x);
  }
  return t.global_avg_pool(x);
}

ad::VarId Model::attention(ad::Tape& t, const Bound& b, ad::VarId z) const {
  if (t.value(z).rank() != 2 || t.value(z).dim(1) != cfg_.feature_dim())
    throw DimensionError("attention: expected [B," + std::to_string(cfg_.feature_dim()) +
                         "], got " + t.value(z).shape_str());
  ad::VarId h = t.linear(z, b.ids[static_cast<size_t>(param_id("AL.fc1.w"))],
                         b.ids[static_cast<size_t>(param_id("AL.fc1.b"))]);
  h = t.relu(h);
  h = t.linear(h, b.ids[static_cast<size_t>(param_id("AL.fc2.w"))],
               b.ids[static_cast<size_t>(param_id("AL.fc2.b"))]);
  return t.sigmoid(h);
}

ad::VarId Model::predict_gaze(ad::Tape& t, const Bound& b, ad::VarId zw) const {
  ad::VarId h = t.linear(zw, b.ids[static_cast<size_t>(param_id("G.fc1.w"))],
                         b.ids[static_cast<size_t>(param_id("G.fc1.b"))]);
  h = t.relu(h);
  return t.linear(h, b.ids[static_cast<size_t>(param_id("G.fc2.w"))],
                  b.ids[static_cast<size_t>(param_id("G.fc2.b"))]);
}

ad::VarId Model::classify_intervention(ad::Tape& t, const Bound& b, ad::VarId z) const {
  ad::VarId h = t.linear(z, b.ids[static_cast<size_t>(param_id("C.fc1.w"))],
                         b.ids[static_cast<size_t>(param_id("C.fc1.b"))]);
  h = t.relu(h);
  return t.linear(h, b.ids[static_cast<size_t>(param_id("C.fc2.w"))],
                  b.ids[static_cast<size_t>(param_id("C.fc2.b"))]);
}

Tensor Model::forward_inference(const Tensor& images) const {
  ad::Tape t;
  t.set_recording(false);
  const Bound b = bind_frozen(t);
  const ad::VarId x = t.constant(images);
  const ad::VarId z = feature_extract(t, b, x);
  const ad::VarId w = attention(t, b, z);
  const ad::VarId y = predict_gaze(t, b, t.mul(z, w));
  return t.value(y);
}

Tensor Model::features(const Tensor& images) const {
  ad::Tape t;
  t.set_recording(false);
  const Bound b = bind_frozen(t);
  return t.value(feature_extract(t, b, t.constant(images)));
}

Tensor batch_images(const std::vector<const Image*>& imgs) {
  if (imgs.empty()) throw std::invalid_argument("batch_images: empty batch");
  const int h = imgs[0]->h, w = imgs[0]->w;
  Tensor t({static_cast<int>(imgs.size()), 3, h, w});
  const int64_t per = static_cast<int64_t>(3) * h * w;
  for (size_t i = 0; i < imgs.size(); ++i) {
    if (imgs[i]->h != h || imgs[i]->w != w)
      throw DimensionError("batch_images: mixed image sizes in batch");
    std::copy(imgs[i]->px.begin(), imgs[i]->px.end(), t.data() + static_cast<int64_t>(i) * per);
  }
  return t;
}

Tensor batch_labels(const std::vector<datagen::GazeLabel>& labels) {
  Tensor t({static_cast<int>(labels.size()), 2});
  for (size_t i = 0; i < labels.size(); ++i) {
    t.at(static_cast<int>(i), 0) = labels[i].pitch;
    t.at(static_cast<int>(i), 1) = labels[i].yaw;
  }
  return t;
}

}  // namespace cauge::nets
