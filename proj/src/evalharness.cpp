#include "cauge/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cauge/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cauge::eval {

namespace {

datagen::GazeLabel row_label(const Tensor& preds, int i) {
  return {preds.at(i, 0), preds.at(i, 1)};
}

double cosine(const Tensor& a, int row_a, const Tensor& b, int row_b) {
  const int n = a.dim(1);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (int j = 0; j < n; ++j) {
    const double x = a.at(row_a, j), y = b.at(row_b, j);
    dot += x * y;
    na += x * x;
    nb += y * y;
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  return denom > 1e-300 ? dot / denom : 0.0;
}

}  // namespace

std::array<double, 3> gaze_to_vector(const datagen::GazeLabel& g) {
  if (!std::isfinite(g.pitch) || !std::isfinite(g.yaw))
    throw RangeError("gaze_to_vector: non-finite gaze");
  return {-std::cos(g.pitch) * std::sin(g.yaw), -std::sin(g.pitch),
          -std::cos(g.pitch) * std::cos(g.yaw)};
}

double angular_error_deg(const datagen::GazeLabel& pred, const datagen::GazeLabel& truth) {
  const auto a = gaze_to_vector(pred);
  const auto b = gaze_to_vector(truth);
  const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
  return std::acos(std::clamp(dot, -1.0, 1.0)) * 180.0 / M_PI;
}

json EvalReport::to_json() const {
  json j;
  j["mean_error_deg"] = mean_error_deg;
  j["count"] = count;
  json pd = json::object();
  for (const auto& [name, st] : per_domain)
    pd[name] = json{{"mean_error_deg", st.mean_error_deg}, {"count", st.count}};
  j["per_domain"] = pd;
  return j;
}

EvalReport evaluate(const nets::Model& model, const datagen::Dataset& ds, int batch_size) {
  if (ds.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const uint64_t hash_before = model.params().hash();

  EvalReport rep;
  std::map<std::string, std::pair<double, int>> acc;
  double total = 0.0;
  const int n = static_cast<int>(ds.samples.size());
  for (int off = 0; off < n; off += batch_size) {
    const int take = std::min(batch_size, n - off);
    std::vector<const Image*> imgs(static_cast<size_t>(take));
    for (int i = 0; i < take; ++i)
      imgs[static_cast<size_t>(i)] = &ds.samples[static_cast<size_t>(off + i)].image;
    const Tensor preds = model.forward_inference(nets::batch_images(imgs));
    for (int i = 0; i < take; ++i) {
      const auto& s = ds.samples[static_cast<size_t>(off + i)];
      const double err = angular_error_deg(row_label(preds, i), s.label);
      total += err;
      auto& slot = acc[s.domain];
      slot.first += err;
      slot.second += 1;
    }
  }
  rep.count = n;
  rep.mean_error_deg = total / n;
  for (const auto& [name, sum_cnt] : acc)
    rep.per_domain[name] = {sum_cnt.first / sum_cnt.second, sum_cnt.second};

  if (model.params().hash() != hash_before)
    throw StateError("evaluate: model parameters changed during evaluation");
  return rep;
}

json InvarianceReport::to_json() const {
  json j;
  j["mean_cosine"] = mean_cosine;
  j["std_cosine"] = std_cosine;
  j["pairs"] = pairs;
  json pd = json::object();
  for (const auto& [name, st] : per_domain)
    pd[name] = json{{"mean_cosine", st.mean_cosine}, {"count", st.count}};
  j["per_domain"] = pd;
  return j;
}

InvarianceReport invariance_score(const nets::Model& model, const datagen::Dataset& ds,
                                  const intervene::AugmixConfig& cfg, int n_pairs,
                                  uint64_t seed, double forced_m) {
  if (ds.samples.empty()) throw std::invalid_argument("invariance_score: empty dataset");
  if (n_pairs < 1) throw std::invalid_argument("invariance_score: n_pairs must be >= 1");

  Rng pick(derive_seed(seed, "invariance-pick"));
  std::vector<double> cos_values(static_cast<size_t>(n_pairs));
  std::map<std::string, std::pair<double, int>> by_domain;

  for (int k = 0; k < n_pairs; ++k) {
    const auto& s = ds.samples[static_cast<size_t>(pick.uniform_index(ds.samples.size()))];
    Rng aug_rng(derive_seed(seed, "invariance-aug", static_cast<uint64_t>(k)));
    intervene::AugmixPlan plan = intervene::sample_augmix_plan(cfg, aug_rng);
    if (forced_m >= 0.0) plan.m = forced_m;
    const Image intervened = intervene::apply_augmix_plan(s.image, plan);

    const Tensor z_pair = model.features(nets::batch_images({&s.image, &intervened}));
    const double c = cosine(z_pair, 0, z_pair, 1);
    cos_values[static_cast<size_t>(k)] = c;
    auto& slot = by_domain[s.domain];
    slot.first += c;
    slot.second += 1;
  }

  InvarianceReport rep;
  rep.pairs = n_pairs;
  double mean = 0.0;
  for (double c : cos_values) mean += c;
  mean /= n_pairs;
  double var = 0.0;
  for (double c : cos_values) var += (c - mean) * (c - mean);
  rep.mean_cosine = mean;
  rep.std_cosine = std::sqrt(var / n_pairs);
  for (const auto& [name, sum_cnt] : by_domain)
    rep.per_domain[name] = {sum_cnt.first / sum_cnt.second, sum_cnt.second};
  return rep;
}

void export_features(const nets::Model& model, const datagen::Dataset& ds,
                     const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open feature export file: " + path);
  const int n_dim = model.config().feature_dim();
  for (int j = 0; j < n_dim; ++j) f << "f" << j << ",";
  f << "pitch,yaw,domain\n";
  char buf[40];
  const int n = static_cast<int>(ds.samples.size());
  const int bs = 128;
  for (int off = 0; off < n; off += bs) {
    const int take = std::min(bs, n - off);
    std::vector<const Image*> imgs(static_cast<size_t>(take));
    for (int i = 0; i < take; ++i)
      imgs[static_cast<size_t>(i)] = &ds.samples[static_cast<size_t>(off + i)].image;
    const Tensor z = model.features(nets::batch_images(imgs));
    for (int i = 0; i < take; ++i) {
      const auto& s = ds.samples[static_cast<size_t>(off + i)];
      for (int j = 0; j < n_dim; ++j) {
        std::snprintf(buf, sizeof(buf), "%.10g", z.at(i, j));
        f << buf << ",";
      }
      std::snprintf(buf, sizeof(buf), "%.10g", s.label.pitch);
      f << buf << ",";
      std::snprintf(buf, sizeof(buf), "%.10g", s.label.yaw);
      f << buf << "," << s.domain << "\n";
    }
  }
  if (!f) throw IoError("feature export write failed: " + path);
}

// ---------------------------------------------------------------------------
// dataset bank
// ---------------------------------------------------------------------------

std::string dataset_dir(const ExperimentConfig& cfg, const std::string& domain,
                        const std::string& split) {
  return (fs::path(cfg.data.root) / domain / split).string();
}

datagen::Dataset load_or_generate(const ExperimentConfig& cfg, const std::string& domain,
                                  const std::string& split) {
  if (split != "train" && split != "eval")
    throw ConfigError("dataset split must be 'train' or 'eval', got '" + split + "'");
  const std::string dir = dataset_dir(cfg, domain, split);
  if (!fs::exists(fs::path(dir) / "manifest.jsonl")) {
    datagen::DomainSpec spec = cfg.find_domain(domain);
    int n = cfg.data.n_train_per_domain;
    uint64_t gaze_seed = cfg.data.gaze_seed;
    if (split == "eval") {
      spec.seed = derive_seed(spec.seed, "eval-split");
      gaze_seed = derive_seed(gaze_seed, "eval-split");
      n = cfg.data.n_eval_per_domain;
    }
    const auto ds = datagen::generate_dataset({spec}, n, gaze_seed, cfg.data.image_size);
    datagen::write_dataset(ds, dir);
  }
  return datagen::read_dataset(dir);
}

void generate_all(const ExperimentConfig& cfg) {
  for (const auto& d : cfg.data.domains) {
    load_or_generate(cfg, d.name, "train");
    load_or_generate(cfg, d.name, "eval");
  }
}

// ---------------------------------------------------------------------------
// cross-domain harness
// ---------------------------------------------------------------------------

RunOutcome run_task(const ExperimentConfig& cfg, const TaskSpec& task, uint64_t seed,
                    const std::string& out_dir) {
  if (task.train_domain == task.test_domain)
    throw ConfigError("task '" + task.name + "': train and test domains must be disjoint");
  datagen::Dataset train_ds = load_or_generate(cfg, task.train_domain, "train");
  const datagen::Dataset source_eval = load_or_generate(cfg, task.train_domain, "eval");
  const datagen::Dataset target_eval = load_or_generate(cfg, task.test_domain, "eval");

  train::Trainer trainer(cfg, std::move(train_ds), seed);
  const train::TrainResult tr = trainer.run(nullptr, out_dir);

  RunOutcome out;
  out.target_error_deg = evaluate(trainer.model(), target_eval).mean_error_deg;
  out.source_error_deg = evaluate(trainer.model(), source_eval).mean_error_deg;
  if (!tr.epochs.empty() && tr.epochs.back().mean_cls_accuracy)
    out.final_epoch_cls_accuracy = *tr.epochs.back().mean_cls_accuracy;
  out.invariance_mean_cosine =
      invariance_score(trainer.model(), source_eval, cfg.augmix, 64,
                       derive_seed(seed, "invariance"))
          .mean_cosine;
  return out;
}

std::vector<AblationFlags> ablation_combos() {
  return {
      {false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
      {true, true, false},   {true, false, true},  {false, true, true},  {true, true, true},
  };
}

AblationResult ablation_matrix(const ExperimentConfig& base, const std::vector<uint64_t>& seeds) {
  if (base.tasks.empty()) throw ConfigError("ablation_matrix: config has no tasks");
  AblationResult res;
  res.seeds = seeds;
  for (const auto& t : base.tasks) res.task_names.push_back(t.name);

  for (const AblationFlags& flags : ablation_combos()) {
    AblationRow row;
    row.flags = flags;
    row.complete = true;
    row.cells.resize(seeds.size());
    for (size_t si = 0; si < seeds.size(); ++si) {
      row.cells[si].resize(base.tasks.size());
      for (size_t ti = 0; ti < base.tasks.size(); ++ti) {
        ExperimentConfig cfg = base;
        cfg.train.mode = "cauge";
        cfg.train.flags = flags;
        AblationCell& cell = row.cells[si][ti];
        try {
          cell.outcome = run_task(cfg, base.tasks[ti], seeds[si]);
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.ok = false;
          cell.error_message = e.what();
          row.complete = false;
        }
      }
    }
    row.task_mean_error.assign(base.tasks.size(), 0.0);
    double avg = 0.0;
    for (size_t ti = 0; ti < base.tasks.size(); ++ti) {
      double sum = 0.0;
      int cnt = 0;
      for (size_t si = 0; si < seeds.size(); ++si)
        if (row.cells[si][ti].ok) {
          sum += row.cells[si][ti].outcome.target_error_deg;
          ++cnt;
        }
      row.task_mean_error[ti] = cnt ? sum / cnt : std::nan("");
      avg += row.task_mean_error[ti];
    }
    row.avg_error = avg / static_cast<double>(base.tasks.size());
    res.rows.push_back(std::move(row));
  }
  return res;
}

int AblationResult::find_row(const AblationFlags& f) const {
  for (size_t i = 0; i < rows.size(); ++i)
    if (rows[i].flags.intr == f.intr && rows[i].flags.fact == f.fact &&
        rows[i].flags.attn == f.attn)
      return static_cast<int>(i);
  return -1;
}

json AblationResult::to_json() const {
  json j;
  j["task_names"] = task_names;
  j["seeds"] = seeds;
  j["rows"] = json::array();
  for (const auto& row : rows) {
    json r;
    r["flags"] = json{{"intr", row.flags.intr}, {"fact", row.flags.fact},
                      {"attn", row.flags.attn}};
    r["task_mean_error"] = row.task_mean_error;
    r["avg_error"] = row.avg_error;
    r["complete"] = row.complete;
    r["cells"] = json::array();
    for (size_t si = 0; si < row.cells.size(); ++si)
      for (size_t ti = 0; ti < row.cells[si].size(); ++ti) {
        const auto& c = row.cells[si][ti];
        json cj;
        cj["seed"] = seeds[si];
        cj["task"] = task_names[ti];
        cj["ok"] = c.ok;
        if (c.ok) {
          cj["target_error_deg"] = c.outcome.target_error_deg;
          cj["source_error_deg"] = c.outcome.source_error_deg;
          cj["final_epoch_cls_accuracy"] = c.outcome.final_epoch_cls_accuracy;
          cj["invariance_mean_cosine"] = c.outcome.invariance_mean_cosine;
        } else {
          cj["error"] = c.error_message;
        }
        r["cells"].push_back(cj);
      }
    j["rows"].push_back(r);
  }
  return j;
}

std::string AblationResult::to_csv() const {
  std::string csv = "intr,fact,attn";
  for (const auto& t : task_names) csv += "," + t;
  csv += ",avg\n";
  char buf[40];
  for (const auto& row : rows) {
    csv += row.flags.intr ? "1" : "0";
    csv += row.flags.fact ? ",1" : ",0";
    csv += row.flags.attn ? ",1" : ",0";
    for (double e : row.task_mean_error) {
      std::snprintf(buf, sizeof(buf), ",%.9g", e);
      csv += buf;
    }
    std::snprintf(buf, sizeof(buf), ",%.9g\n", row.avg_error);
    csv += buf;
  }
  return csv;
}

AblationResult parse_ablation_json(const json& j) {
  AblationResult res;
  res.task_names = j.at("task_names").get<std::vector<std::string>>();
  res.seeds = j.at("seeds").get<std::vector<uint64_t>>();
  for (const auto& rj : j.at("rows")) {
    AblationRow row;
    row.flags.intr = rj.at("flags").at("intr").get<bool>();
    row.flags.fact = rj.at("flags").at("fact").get<bool>();
    row.flags.attn = rj.at("flags").at("attn").get<bool>();
    row.task_mean_error = rj.at("task_mean_error").get<std::vector<double>>();
    row.avg_error = rj.at("avg_error").get<double>();
    row.complete = rj.at("complete").get<bool>();
    row.cells.resize(res.seeds.size());
    for (auto& c : row.cells) c.resize(res.task_names.size());
    for (const auto& cj : rj.at("cells")) {
      const auto si = static_cast<size_t>(
          std::find(res.seeds.begin(), res.seeds.end(), cj.at("seed").get<uint64_t>()) -
          res.seeds.begin());
      const auto ti = static_cast<size_t>(
          std::find(res.task_names.begin(), res.task_names.end(),
                    cj.at("task").get<std::string>()) -
          res.task_names.begin());
      AblationCell& cell = row.cells.at(si).at(ti);
      cell.ok = cj.at("ok").get<bool>();
      if (cell.ok) {
        cell.outcome.target_error_deg = cj.at("target_error_deg").get<double>();
        cell.outcome.source_error_deg = cj.at("source_error_deg").get<double>();
        cell.outcome.final_epoch_cls_accuracy = cj.at("final_epoch_cls_accuracy").get<double>();
        cell.outcome.invariance_mean_cosine = cj.at("invariance_mean_cosine").get<double>();
      } else {
        cell.error_message = cj.value("error", "");
      }
    }
    res.rows.push_back(std::move(row));
  }
  return res;
}

}  // namespace cauge::eval
