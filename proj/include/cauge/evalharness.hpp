#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cauge/config.hpp"
#include "cauge/datagen.hpp"
#include "cauge/intervene.hpp"
#include "cauge/nets.hpp"

namespace cauge::eval {

// unit gaze direction; (0,0) maps to (0,0,-1)
std::array<double, 3> gaze_to_vector(const datagen::GazeLabel& g);

// arccos of the clamped dot product, in degrees; symmetric, in [0, 180]
double angular_error_deg(const datagen::GazeLabel& pred, const datagen::GazeLabel& truth);

struct DomainStats {
  double mean_error_deg = 0.0;
  int count = 0;
};

struct EvalReport {
  double mean_error_deg = 0.0;
  int count = 0;
  std::map<std::string, DomainStats> per_domain;

  nlohmann::json to_json() const;
};

// Eq.-9 inference over the dataset: no augmentation, no classifier, no
// parameter updates (asserted via a parameter hash check).
EvalReport evaluate(const nets::Model& model, const datagen::Dataset& ds, int batch_size = 128);

struct DomainCosine {
  double mean_cosine = 0.0;
  int count = 0;
};

struct InvarianceReport {
  double mean_cosine = 0.0;
  double std_cosine = 0.0;
  int pairs = 0;
  std::map<std::string, DomainCosine> per_domain;

  nlohmann::json to_json() const;
};

// Cosine similarity between F(x) and F(aug(x)) over sampled pairs.
// forced_m >= 0 pins the AugMix mixing weight (1.0 = identity intervention).
InvarianceReport invariance_score(const nets::Model& model, const datagen::Dataset& ds,
                                  const intervene::AugmixConfig& cfg, int n_pairs,
                                  uint64_t seed, double forced_m = -1.0);

// One row per sample: N features, pitch, yaw, domain (header-bearing CSV).
void export_features(const nets::Model& model, const datagen::Dataset& ds,
                     const std::string& path);

// ---------------------------------------------------------------------------
// dataset bank + cross-domain harness
// ---------------------------------------------------------------------------

// Datasets always go through disk (8-bit storage) so every consumer sees
// identical pixels. Generates <root>/<domain>/<split> on first use.
datagen::Dataset load_or_generate(const ExperimentConfig& cfg, const std::string& domain,
                                  const std::string& split);
std::string dataset_dir(const ExperimentConfig& cfg, const std::string& domain,
                        const std::string& split);
void generate_all(const ExperimentConfig& cfg);

struct RunOutcome {
  double target_error_deg = 0.0;        // on the test domain's eval split
  double source_error_deg = 0.0;        // on the train domain's eval split
  double final_epoch_cls_accuracy = -1.0;
  double invariance_mean_cosine = 0.0;  // on the train domain's eval split
};

// Trains one configuration on task.train_domain and evaluates it; the
// building block for the ablation/comparison matrices.
RunOutcome run_task(const ExperimentConfig& cfg, const TaskSpec& task, uint64_t seed,
                    const std::string& out_dir = "");

struct AblationCell {
  bool ok = false;
  std::string error_message;
  RunOutcome outcome;
};

struct AblationRow {
  AblationFlags flags;
  // cells[seed_index][task_index]
  std::vector<std::vector<AblationCell>> cells;
  std::vector<double> task_mean_error;  // over seeds, per task
  double avg_error = 0.0;               // mean over tasks
  bool complete = false;                // every cell trained
};

struct AblationResult {
  std::vector<AblationRow> rows;  // 8 rows, Table-2 ordering
  std::vector<std::string> task_names;
  std::vector<uint64_t> seeds;

  nlohmann::json to_json() const;
  std::string to_csv() const;
  int find_row(const AblationFlags& f) const;
};

// order: ---, I--, -F-, --A, IF-, I-A, -FA, IFA
std::vector<AblationFlags> ablation_combos();

AblationResult ablation_matrix(const ExperimentConfig& base, const std::vector<uint64_t>& seeds);

AblationResult parse_ablation_json(const nlohmann::json& j);

}  // namespace cauge::eval
