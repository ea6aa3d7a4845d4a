#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cauge/datagen.hpp"
#include "cauge/tape.hpp"
#include "cauge/tensor.hpp"

namespace cauge::nets {

// Architecture knobs. The trunk is a stack of conv(3x3, stride 2, pad 1) ->
// group norm -> relu blocks followed by global average pooling; the feature
// dimension equals the last trunk width.
struct NetConfig {
  std::string preset = "desk";
  int image_size = 64;
  std::vector<int> trunk_channels = {16, 32, 64, 128};
  int gn_groups = 8;
  int reduction_ratio = 8;  // attention bottleneck N -> N/r -> N
  int g_hidden = 64;        // gaze head MLP width
  int c_hidden = 64;        // intervention classifier width
  std::array<double, 3> norm_mean = {0.5, 0.5, 0.5};
  std::array<double, 3> norm_std = {0.5, 0.5, 0.5};

  int feature_dim() const { return trunk_channels.back(); }
  void validate() const;

  static NetConfig desk(int image_size = 64);
  // ResNet-18-scale widths and ImageNet normalization; not exercised in CI
  static NetConfig paper();
};

enum class Owner { F, AL, G, C };
const char* owner_name(Owner o);

struct Param {
  std::string name;
  Owner owner;
  Tensor value;
};

struct ModelParams {
  std::vector<Param> items;

  int find(const std::string& name) const;  // -1 if absent
  std::vector<int> owned_by(Owner o) const;
  std::vector<int> owned_by_main() const;  // F + AL + G (Eq-8 left argmin set)
  uint64_t hash() const;
  int64_t total_elements() const;
};

// Param leaves bound onto one tape. Which owners are trainable decides which
// leaves carry gradients; the others participate as constants (e.g. the
// frozen classifier in the confusion pass).
struct Bound {
  std::vector<ad::VarId> ids;  // aligned with ModelParams::items
};

class Model {
 public:
  explicit Model(NetConfig cfg);

  const NetConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  // fan-in-scaled normal weights, zero biases, unit group-norm gains
  void init_weights(uint64_t seed);

  Bound bind(ad::Tape& t, std::initializer_list<Owner> trainable) const;
  Bound bind_frozen(ad::Tape& t) const { return bind(t, {}); }

  // images: [B,3,H,W] raw pixels in [0,1]; normalization happens inside
  ad::VarId feature_extract(ad::Tape& t, const Bound& b, ad::VarId images) const;
  ad::VarId attention(ad::Tape& t, const Bound& b, ad::VarId z) const;
  ad::VarId predict_gaze(ad::Tape& t, const Bound& b, ad::VarId zw) const;
  ad::VarId classify_intervention(ad::Tape& t, const Bound& b, ad::VarId z) const;  // logits [B,1]

  // G(F(x) . AL(F(x))) with no gradient bookkeeping; the inference path of
  // a trained model (no augmentation, no classifier).
  Tensor forward_inference(const Tensor& images) const;
  Tensor features(const Tensor& images) const;  // F(x) only

 private:
  int param_id(const std::string& name) const;  // throws if absent

  NetConfig cfg_;
  ModelParams params_;
};

// batch helpers
Tensor batch_images(const std::vector<const Image*>& imgs);
Tensor batch_labels(const std::vector<datagen::GazeLabel>& labels);

}  // namespace cauge::nets
