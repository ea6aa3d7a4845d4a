#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cauge/checkpoint.hpp"
#include "cauge/config.hpp"
#include "cauge/datagen.hpp"
#include "cauge/nets.hpp"

namespace cauge::train {

struct StepMetrics {
  int epoch = 0;
  int step = 0;
  int64_t global_step = 0;
  // which fields are meaningful depends on the mode/flags; baseline rows
  // carry only l_gaze
  std::optional<double> l_cls;
  std::optional<double> l_con;
  std::optional<double> l_fac;
  std::optional<double> l_prim;
  std::optional<double> cls_accuracy;
  double l_gaze = 0.0;

  bool all_finite() const;
};

struct EpochSummary {
  int epoch = 0;
  int steps = 0;
  double mean_l_gaze = 0.0;
  std::optional<double> mean_l_prim;
  std::optional<double> mean_cls_accuracy;
};

// Append-only JSONL metrics stream; one line per step plus one summary line
// per epoch. Doubles are printed with 17 significant digits so reruns can be
// compared exactly.
class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, bool append);
  void write(const StepMetrics& m);
  void write(const EpochSummary& s);

 private:
  std::ofstream* out_;  // owned; kept as pointer to avoid <fstream> in the header
  std::string path_;

 public:
  ~MetricsWriter();
  MetricsWriter(const MetricsWriter&) = delete;
  MetricsWriter& operator=(const MetricsWriter&) = delete;
};

// One-sided Adam over a fixed subset of model parameters.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, std::vector<int> param_indices);

  void step(nets::ModelParams& params, ad::Tape& tape, const nets::Bound& bound);

  const std::vector<int>& indices() const { return indices_; }
  OptimizerState export_state(const nets::ModelParams& params) const;
  void import_state(const nets::ModelParams& params, const OptimizerState& st);

 private:
  double lr_, beta1_, beta2_;
  static constexpr double kEps = 1e-8;
  int64_t t_ = 0;
  std::vector<int> indices_;
  std::vector<Tensor> m_, v_;  // aligned with indices_
};

struct TrainResult {
  std::vector<StepMetrics> steps;
  std::vector<EpochSummary> epochs;
  std::string checkpoint_path;
};

// Runs the two-phase adversarial loop: per batch, phase A updates the
// intervention classifier C on detached features, phase B updates
// {F, AL, G} on the weighted primary objective through the frozen C.
// mode=baseline (or every ablation flag off) degenerates to single-stream
// L1 regression with no augmentation.
class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, datagen::Dataset train_data, uint64_t seed);

  void resume(const CheckpointRecord& rec);

  StepMetrics train_step(const std::vector<int>& batch_indices, int epoch, int step);

  // full run; writes checkpoints under out_dir (empty out_dir = no files)
  TrainResult run(MetricsWriter* sink, const std::string& out_dir);

  nets::Model& model() { return model_; }
  const nets::Model& model() const { return model_; }
  bool baseline_path() const;
  uint64_t seed() const { return seed_; }
  CheckpointRecord make_checkpoint(int64_t epochs_completed) const;

  // label-preserving intervention used for the augmented stream; exposed for
  // pipeline-level tests
  datagen::ImageSample intervene_sample(const datagen::ImageSample& s, Rng& rng,
                                        const std::vector<int>& batch_indices,
                                        int position_in_batch) const;

 private:
  ExperimentConfig cfg_;
  datagen::Dataset data_;
  uint64_t seed_;
  nets::Model model_;
  Adam adam_main_;
  Adam adam_cls_;
  int start_epoch_ = 0;
  int64_t global_step_ = 0;
};

}  // namespace cauge::train
