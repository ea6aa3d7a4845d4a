#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "cauge/nets.hpp"
#include "cauge/tensor.hpp"

namespace cauge::train {

struct AdamTensors {
  Tensor m;
  Tensor v;
};

struct OptimizerState {
  int64_t t = 0;
  std::map<std::string, AdamTensors> slots;  // keyed by parameter name
};

// Everything needed to resume or evaluate a run: the resolved config (which
// pins the architecture and the ablation variant), parameters, and both
// optimizer states. Round-trips bitwise.
struct CheckpointRecord {
  std::string config_json;
  int64_t epochs_completed = 0;
  int64_t global_step = 0;
  nets::ModelParams params;
  OptimizerState adam_main;
  OptimizerState adam_cls;
};

void save_checkpoint(const CheckpointRecord& rec, const std::string& path);
CheckpointRecord load_checkpoint(const std::string& path);

// Copies checkpoint parameters into the model; throws DimensionError naming
// the first mismatched tensor, StateError on missing ones.
void apply_params(const CheckpointRecord& rec, nets::Model& model);

// Convenience: rebuild the model variant recorded in the checkpoint.
nets::Model model_from_checkpoint(const CheckpointRecord& rec);

}  // namespace cauge::train
