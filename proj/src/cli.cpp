#include "cauge/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cauge/config.hpp"
#include "cauge/evalharness.hpp"
#include "cauge/gradcheck.hpp"
#include "cauge/kernels.hpp"
#include "cauge/parallel.hpp"
#include "cauge/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cauge::cli {

namespace {

struct CommonOpts {
  std::string config_path;
  std::string checkpoint_path;
  std::string dataset_dir;
  std::string out;
  std::string task;
  std::string resume;
  uint64_t seed = 0;
  bool seed_set = false;
  int seeds_k = 0;
  int jobs = 0;
  int pairs = 200;
  double forced_m = -1.0;
};

void apply_jobs(int jobs) {
  if (jobs > 0) set_worker_threads(jobs);
}

ExperimentConfig load_config(const CommonOpts& o) {
  ExperimentConfig cfg = ExperimentConfig::load(o.config_path);
  if (o.seed_set) cfg.seed = o.seed;
  if (o.jobs > 0) cfg.jobs = o.jobs;
  apply_jobs(cfg.jobs);
  return cfg;
}

void write_json_file(const json& j, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(2) << "\n";
}

int cmd_generate(const CommonOpts& o) {
  const ExperimentConfig cfg = load_config(o);
  eval::generate_all(cfg);
  for (const auto& d : cfg.data.domains) {
    std::printf("dataset %s: %s, %s\n", d.name.c_str(),
                eval::dataset_dir(cfg, d.name, "train").c_str(),
                eval::dataset_dir(cfg, d.name, "eval").c_str());
  }
  return 0;
}

int cmd_train(const CommonOpts& o) {
  ExperimentConfig cfg = load_config(o);
  if (cfg.tasks.empty()) throw ConfigError("config has no tasks; add a tasks[] entry");
  const TaskSpec task = o.task.empty() ? cfg.tasks.front() : cfg.find_task(o.task);

  const std::string out_dir = o.out.empty() ? cfg.resolved_out_dir() : o.out;
  write_resolved_config(cfg, out_dir);

  datagen::Dataset train_ds = eval::load_or_generate(cfg, task.train_domain, "train");
  train::Trainer trainer(cfg, std::move(train_ds), cfg.seed);

  const bool resuming = !o.resume.empty();
  if (resuming) trainer.resume(train::load_checkpoint(o.resume));

  train::MetricsWriter metrics((fs::path(out_dir) / "metrics.jsonl").string(), resuming);
  const train::TrainResult res = trainer.run(&metrics, out_dir);

  std::printf("trained task '%s' (%s, seed %llu): %zu steps, checkpoint %s\n", task.name.c_str(),
              trainer.baseline_path() ? "baseline" : "cauge",
              static_cast<unsigned long long>(cfg.seed), res.steps.size(),
              res.checkpoint_path.c_str());
  return 0;
}

int cmd_eval(const CommonOpts& o) {
  apply_jobs(o.jobs);
  const auto rec = train::load_checkpoint(o.checkpoint_path);
  const nets::Model model = train::model_from_checkpoint(rec);
  const datagen::Dataset ds = datagen::read_dataset(o.dataset_dir);
  const eval::EvalReport rep = eval::evaluate(model, ds);

  json j = rep.to_json();
  j["dataset"] = o.dataset_dir;
  j["checkpoint"] = o.checkpoint_path;
  j["tool_version"] = kToolVersion;
  j["config_snapshot"] = json::parse(rec.config_json);
  const std::string out = o.out.empty()
                              ? (fs::path(o.checkpoint_path).parent_path() / "eval_report.json")
                                    .string()
                              : o.out;
  write_json_file(j, out);
  std::printf("eval: mean angular error %.4f deg over %d samples -> %s\n", rep.mean_error_deg,
              rep.count, out.c_str());
  return 0;
}

int cmd_ablate(const CommonOpts& o) {
  ExperimentConfig cfg = load_config(o);
  std::vector<uint64_t> seeds = cfg.seed_list();
  if (o.seeds_k > 0) {
    seeds.clear();
    for (int i = 0; i < o.seeds_k; ++i) seeds.push_back(cfg.seed + static_cast<uint64_t>(i));
  }
  const std::string out_dir = o.out.empty() ? cfg.resolved_out_dir() : o.out;
  ExperimentConfig snap = cfg;
  snap.seeds = seeds;
  write_resolved_config(snap, out_dir);

  const eval::AblationResult res = eval::ablation_matrix(cfg, seeds);
  write_json_file(res.to_json(), (fs::path(out_dir) / "ablation.json").string());
  std::ofstream csv(fs::path(out_dir) / "ablation.csv");
  if (!csv) throw IoError("cannot write ablation.csv in " + out_dir);
  csv << res.to_csv();
  std::printf("ablation: %zu rows x (%zu tasks + avg) over %zu seeds -> %s\n", res.rows.size(),
              res.task_names.size(), seeds.size(), out_dir.c_str());
  for (const auto& row : res.rows)
    std::printf("  intr=%d fact=%d attn=%d avg=%.4f%s\n", row.flags.intr, row.flags.fact,
                row.flags.attn, row.avg_error, row.complete ? "" : " (incomplete)");
  return 0;
}

int cmd_invariance(const CommonOpts& o) {
  apply_jobs(o.jobs);
  const auto rec = train::load_checkpoint(o.checkpoint_path);
  const nets::Model model = train::model_from_checkpoint(rec);
  const auto cfg = ExperimentConfig::from_json(json::parse(rec.config_json));
  const datagen::Dataset ds = datagen::read_dataset(o.dataset_dir);
  const uint64_t seed = o.seed_set ? o.seed : cfg.seed;
  const eval::InvarianceReport rep =
      eval::invariance_score(model, ds, cfg.augmix, o.pairs, seed, o.forced_m);

  json j = rep.to_json();
  j["dataset"] = o.dataset_dir;
  j["checkpoint"] = o.checkpoint_path;
  j["seed"] = seed;
  j["tool_version"] = kToolVersion;
  const std::string out =
      o.out.empty()
          ? (fs::path(o.checkpoint_path).parent_path() / "invariance_report.json").string()
          : o.out;
  write_json_file(j, out);
  std::printf("invariance: mean cosine %.6f (std %.6f) over %d pairs -> %s\n", rep.mean_cosine,
              rep.std_cosine, rep.pairs, out.c_str());
  return 0;
}

int cmd_export_features(const CommonOpts& o) {
  apply_jobs(o.jobs);
  const auto rec = train::load_checkpoint(o.checkpoint_path);
  const nets::Model model = train::model_from_checkpoint(rec);
  const datagen::Dataset ds = datagen::read_dataset(o.dataset_dir);
  eval::export_features(model, ds, o.out);
  std::printf("exported %zu feature rows (%d dims) -> %s\n", ds.samples.size(),
              model.config().feature_dim(), o.out.c_str());
  return 0;
}

int cmd_gradcheck(const CommonOpts& o) {
  const uint64_t seed = o.seed_set ? o.seed : 20240001ull;
  const auto results = gradcheck::run_all(seed);
  bool ok = true;
  for (const auto& r : results) {
    const bool pass = r.max_rel_err <= gradcheck::kTolerance;
    ok = ok && pass;
    std::printf("%-24s max_rel_err %.3e over %d coords  [%s]\n", r.component.c_str(),
                r.max_rel_err, r.coords_checked, pass ? "ok" : "FAIL");
  }
  std::printf("gradcheck: %s (tolerance %.1e, kernels=%s)\n", ok ? "all components pass" : "FAILED",
              gradcheck::kTolerance, kernels::backend_name().c_str());
  return ok ? 0 : 1;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"CauGE: causal-representation domain generalization for gaze estimation"};
  app.set_version_flag("--version", std::string(kToolVersion) + " (kernels: " +
                                        kernels::backend_name() + ")");
  app.require_subcommand(1);

  CommonOpts o;
  std::string kernels_flag;
  app.add_option("--kernels", kernels_flag, "force kernel backend (scalar|avx2|auto)");

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "experiment config JSON")->required();
  };
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "seed override")->each([&](const std::string&) {
      o.seed_set = true;
    });
  };
  auto add_jobs = [&](CLI::App* sub) {
    sub->add_option("--jobs", o.jobs, "worker threads (0 = auto)");
  };

  CLI::App* generate = app.add_subcommand("generate", "render the configured synthetic datasets");
  add_config(generate);
  add_jobs(generate);

  CLI::App* train = app.add_subcommand("train", "train one task (checkpoint + metrics stream)");
  add_config(train);
  add_seed(train);
  add_jobs(train);
  train->add_option("--task", o.task, "task name (default: first task)");
  train->add_option("--out", o.out, "output directory (default: config out_dir)");
  train->add_option("--resume", o.resume, "checkpoint to resume from");

  CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  evalc->add_option("--checkpoint", o.checkpoint_path, "checkpoint file")->required();
  evalc->add_option("--dataset", o.dataset_dir, "dataset directory")->required();
  evalc->add_option("--out", o.out, "report path (default: next to checkpoint)");
  add_jobs(evalc);

  CLI::App* ablate = app.add_subcommand("ablate", "run the 8-way ablation matrix over all tasks");
  add_config(ablate);
  add_seed(ablate);
  add_jobs(ablate);
  ablate->add_option("--seeds", o.seeds_k, "number of seeds (seed, seed+1, ...)");
  ablate->add_option("--out", o.out, "output directory (default: config out_dir)");

  CLI::App* invariance = app.add_subcommand("invariance", "clean/intervened feature similarity");
  invariance->add_option("--checkpoint", o.checkpoint_path, "checkpoint file")->required();
  invariance->add_option("--dataset", o.dataset_dir, "dataset directory")->required();
  invariance->add_option("--pairs", o.pairs, "number of sampled pairs");
  invariance->add_option("--forced-m", o.forced_m, "pin the AugMix mixing weight (testing aid)");
  invariance->add_option("--out", o.out, "report path (default: next to checkpoint)");
  add_seed(invariance);
  add_jobs(invariance);

  CLI::App* exportf = app.add_subcommand("export-features", "dump features as CSV");
  exportf->add_option("--checkpoint", o.checkpoint_path, "checkpoint file")->required();
  exportf->add_option("--dataset", o.dataset_dir, "dataset directory")->required();
  exportf->add_option("--out", o.out, "CSV output path")->required();
  add_jobs(exportf);

  CLI::App* gradcheckc =
      app.add_subcommand("gradcheck", "finite-difference verification of all gradients");
  add_seed(gradcheckc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!kernels_flag.empty()) {
      if (kernels_flag == "scalar")
        kernels::set_backend(kernels::Backend::Scalar);
      else if (kernels_flag == "avx2")
        kernels::set_backend(kernels::Backend::Avx2);
      else if (kernels_flag != "auto")
        throw ConfigError("--kernels must be scalar|avx2|auto");
    }
    if (generate->parsed()) return cmd_generate(o);
    if (train->parsed()) return cmd_train(o);
    if (evalc->parsed()) return cmd_eval(o);
    if (ablate->parsed()) return cmd_ablate(o);
    if (invariance->parsed()) return cmd_invariance(o);
    if (exportf->parsed()) return cmd_export_features(o);
    if (gradcheckc->parsed()) return cmd_gradcheck(o);
    std::fprintf(stderr, "error: no subcommand\n");
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace cauge::cli
