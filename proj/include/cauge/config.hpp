#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cauge/datagen.hpp"
#include "cauge/intervene.hpp"
#include "cauge/losses.hpp"
#include "cauge/nets.hpp"

namespace cauge {

struct DataConfig {
  std::string root = "data";
  int image_size = 64;
  int n_train_per_domain = 384;
  int n_eval_per_domain = 192;
  uint64_t gaze_seed = 9001;
  std::vector<datagen::DomainSpec> domains;
};

struct TaskSpec {
  std::string name;
  std::string train_domain;
  std::string test_domain;
};

enum class Intervention { Augmix, FtBlend };
const char* intervention_name(Intervention v);

struct AblationFlags {
  bool intr = true;
  bool fact = true;
  bool attn = true;

  bool all_off() const { return !intr && !fact && !attn; }
};

struct FtBlendConfig {
  double lambda_max = 0.5;  // lambda ~ U[0, lambda_max] per sample
};

struct TrainSection {
  std::string mode = "cauge";  // cauge | baseline
  Intervention intervention = Intervention::Augmix;
  AblationFlags flags;
  int epochs = 50;
  int batch_size = 64;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.95;
  losses::LossWeights loss_weights;
  int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
};

// One self-contained experiment document; a run is fully determined by this
// plus the tool version. Unknown fields are rejected so typos surface as
// schema errors.
struct ExperimentConfig {
  std::string out_dir = "out";
  uint64_t seed = 1;
  std::vector<uint64_t> seeds;  // multi-seed harnesses; defaults to {seed}
  int jobs = 0;                 // 0 = auto
  DataConfig data;
  nets::NetConfig network;
  intervene::AugmixConfig augmix;
  FtBlendConfig ft_blend;
  TrainSection train;
  std::vector<TaskSpec> tasks;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  nlohmann::json to_json() const;  // fully resolved, every field explicit
  void validate() const;

  const datagen::DomainSpec& find_domain(const std::string& name) const;
  const TaskSpec& find_task(const std::string& name) const;
  std::vector<uint64_t> seed_list() const;  // seeds if set, else {seed}

  // resolves out_dir against CAUGE_OUT_ROOT when relative
  std::string resolved_out_dir() const;
};

// writes <dir>/config.json with the tool version stamped in
void write_resolved_config(const ExperimentConfig& cfg, const std::string& dir);

}  // namespace cauge
