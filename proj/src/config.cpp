#include "cauge/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "cauge/common.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cauge {

namespace {

[[noreturn]] void schema_error(const std::string& ctx, const std::string& what) {
  throw ConfigError("config: " + ctx + ": " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!j.is_object()) schema_error(ctx, "expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) schema_error(ctx, "unknown field '" + key + "'");
}

template <typename T>
T get_req(const json& j, const char* key, const std::string& ctx) {
  if (!j.contains(key)) schema_error(ctx, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    schema_error(ctx, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T get_opt(const json& j, const char* key, T def, const std::string& ctx) {
  if (!j.contains(key)) return def;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    schema_error(ctx, std::string("field '") + key + "' has the wrong type");
  }
}

datagen::Interval get_interval(const json& j, const char* key, datagen::Interval def,
                               const std::string& ctx) {
  if (!j.contains(key)) return def;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    schema_error(ctx, std::string("field '") + key + "' must be [lo, hi]");
  return {v[0].get<double>(), v[1].get<double>()};
}

json interval_json(const datagen::Interval& iv) { return json::array({iv.lo, iv.hi}); }

}  // namespace

const char* intervention_name(Intervention v) {
  return v == Intervention::Augmix ? "augmix" : "ft_blend";
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  check_keys(j, {"out_dir", "seed", "seeds", "jobs", "data", "network", "augmix", "ft_blend",
                 "train", "tasks", "tool_version"},
             "top level");
  cfg.out_dir = get_opt<std::string>(j, "out_dir", cfg.out_dir, "top level");
  cfg.seed = get_opt<uint64_t>(j, "seed", cfg.seed, "top level");
  cfg.seeds = get_opt<std::vector<uint64_t>>(j, "seeds", {}, "top level");
  cfg.jobs = get_opt<int>(j, "jobs", 0, "top level");

  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, {"root", "image_size", "n_train_per_domain", "n_eval_per_domain", "gaze_seed",
                   "domains"},
               "data");
    cfg.data.root = get_opt<std::string>(d, "root", cfg.data.root, "data");
    cfg.data.image_size = get_opt<int>(d, "image_size", cfg.data.image_size, "data");
    cfg.data.n_train_per_domain =
        get_opt<int>(d, "n_train_per_domain", cfg.data.n_train_per_domain, "data");
    cfg.data.n_eval_per_domain =
        get_opt<int>(d, "n_eval_per_domain", cfg.data.n_eval_per_domain, "data");
    cfg.data.gaze_seed = get_opt<uint64_t>(d, "gaze_seed", cfg.data.gaze_seed, "data");
    if (d.contains("domains")) {
      if (!d.at("domains").is_array()) schema_error("data", "'domains' must be an array");
      for (const auto& dj : d.at("domains")) {
        const std::string ctx = "data.domains[" + std::to_string(cfg.data.domains.size()) + "]";
        check_keys(dj, {"name", "seed", "illumination", "tint", "blur_sigma", "noise_sigma",
                        "background_level"},
                   ctx);
        datagen::DomainSpec ds;
        ds.name = get_req<std::string>(dj, "name", ctx);
        ds.seed = get_req<uint64_t>(dj, "seed", ctx);
        ds.illumination = get_interval(dj, "illumination", ds.illumination, ctx);
        ds.tint = get_interval(dj, "tint", ds.tint, ctx);
        ds.blur_sigma = get_interval(dj, "blur_sigma", ds.blur_sigma, ctx);
        ds.noise_sigma = get_interval(dj, "noise_sigma", ds.noise_sigma, ctx);
        ds.background_level = get_interval(dj, "background_level", ds.background_level, ctx);
        cfg.data.domains.push_back(std::move(ds));
      }
    }
  }

  // network: preset first, then overrides
  {
    const json nj = j.contains("network") ? j.at("network") : json::object();
    check_keys(nj, {"preset", "trunk_channels", "gn_groups", "reduction_ratio", "g_hidden",
                    "c_hidden", "norm_mean", "norm_std", "image_size"},
               "network");
    const std::string preset = get_opt<std::string>(nj, "preset", "desk", "network");
    if (preset == "desk")
      cfg.network = nets::NetConfig::desk(cfg.data.image_size);
    else if (preset == "paper")
      cfg.network = nets::NetConfig::paper();
    else
      schema_error("network", "unknown preset '" + preset + "' (desk|paper)");
    cfg.network.image_size = get_opt<int>(nj, "image_size", cfg.data.image_size, "network");
    cfg.network.trunk_channels =
        get_opt<std::vector<int>>(nj, "trunk_channels", cfg.network.trunk_channels, "network");
    cfg.network.gn_groups = get_opt<int>(nj, "gn_groups", cfg.network.gn_groups, "network");
    cfg.network.reduction_ratio =
        get_opt<int>(nj, "reduction_ratio", cfg.network.reduction_ratio, "network");
    cfg.network.g_hidden = get_opt<int>(nj, "g_hidden", cfg.network.g_hidden, "network");
    cfg.network.c_hidden = get_opt<int>(nj, "c_hidden", cfg.network.c_hidden, "network");
    if (nj.contains("norm_mean")) {
      const auto v = get_req<std::vector<double>>(nj, "norm_mean", "network");
      if (v.size() != 3) schema_error("network", "'norm_mean' must have 3 entries");
      std::copy(v.begin(), v.end(), cfg.network.norm_mean.begin());
    }
    if (nj.contains("norm_std")) {
      const auto v = get_req<std::vector<double>>(nj, "norm_std", "network");
      if (v.size() != 3) schema_error("network", "'norm_std' must have 3 entries");
      std::copy(v.begin(), v.end(), cfg.network.norm_std.begin());
    }
  }

  if (j.contains("augmix")) {
    const auto& a = j.at("augmix");
    check_keys(a, {"width", "max_depth", "severity", "dirichlet_alpha", "beta_alpha"}, "augmix");
    cfg.augmix.width = get_opt<int>(a, "width", cfg.augmix.width, "augmix");
    cfg.augmix.max_depth = get_opt<int>(a, "max_depth", cfg.augmix.max_depth, "augmix");
    cfg.augmix.severity = get_opt<int>(a, "severity", cfg.augmix.severity, "augmix");
    cfg.augmix.dirichlet_alpha =
        get_opt<double>(a, "dirichlet_alpha", cfg.augmix.dirichlet_alpha, "augmix");
    cfg.augmix.beta_alpha = get_opt<double>(a, "beta_alpha", cfg.augmix.beta_alpha, "augmix");
  }

  if (j.contains("ft_blend")) {
    const auto& f = j.at("ft_blend");
    check_keys(f, {"lambda_max"}, "ft_blend");
    cfg.ft_blend.lambda_max = get_opt<double>(f, "lambda_max", cfg.ft_blend.lambda_max, "ft_blend");
  }

  if (j.contains("train")) {
    const auto& tj = j.at("train");
    check_keys(tj, {"mode", "intervention", "flags", "epochs", "batch_size", "lr", "adam_beta1",
                    "adam_beta2", "loss_weights", "checkpoint_every"},
               "train");
    cfg.train.mode = get_opt<std::string>(tj, "mode", cfg.train.mode, "train");
    const std::string iv =
        get_opt<std::string>(tj, "intervention", intervention_name(cfg.train.intervention), "train");
    if (iv == "augmix")
      cfg.train.intervention = Intervention::Augmix;
    else if (iv == "ft_blend")
      cfg.train.intervention = Intervention::FtBlend;
    else
      schema_error("train", "unknown intervention '" + iv + "' (augmix|ft_blend)");
    if (tj.contains("flags")) {
      const auto& fl = tj.at("flags");
      check_keys(fl, {"intr", "fact", "attn"}, "train.flags");
      cfg.train.flags.intr = get_opt<bool>(fl, "intr", true, "train.flags");
      cfg.train.flags.fact = get_opt<bool>(fl, "fact", true, "train.flags");
      cfg.train.flags.attn = get_opt<bool>(fl, "attn", true, "train.flags");
    }
    cfg.train.epochs = get_opt<int>(tj, "epochs", cfg.train.epochs, "train");
    cfg.train.batch_size = get_opt<int>(tj, "batch_size", cfg.train.batch_size, "train");
    cfg.train.lr = get_opt<double>(tj, "lr", cfg.train.lr, "train");
    cfg.train.adam_beta1 = get_opt<double>(tj, "adam_beta1", cfg.train.adam_beta1, "train");
    cfg.train.adam_beta2 = get_opt<double>(tj, "adam_beta2", cfg.train.adam_beta2, "train");
    if (tj.contains("loss_weights")) {
      const auto& lw = tj.at("loss_weights");
      check_keys(lw, {"con", "fac", "gaze"}, "train.loss_weights");
      cfg.train.loss_weights.con = get_opt<double>(lw, "con", 3.0, "train.loss_weights");
      cfg.train.loss_weights.fac = get_opt<double>(lw, "fac", 2.0, "train.loss_weights");
      cfg.train.loss_weights.gaze = get_opt<double>(lw, "gaze", 5.0, "train.loss_weights");
    }
    cfg.train.checkpoint_every =
        get_opt<int>(tj, "checkpoint_every", cfg.train.checkpoint_every, "train");
  }

  if (j.contains("tasks")) {
    if (!j.at("tasks").is_array()) schema_error("top level", "'tasks' must be an array");
    for (const auto& tk : j.at("tasks")) {
      const std::string ctx = "tasks[" + std::to_string(cfg.tasks.size()) + "]";
      check_keys(tk, {"name", "train_domain", "test_domain"}, ctx);
      TaskSpec ts;
      ts.name = get_req<std::string>(tk, "name", ctx);
      ts.train_domain = get_req<std::string>(tk, "train_domain", ctx);
      ts.test_domain = get_req<std::string>(tk, "test_domain", ctx);
      cfg.tasks.push_back(std::move(ts));
    }
  }

  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["tool_version"] = kToolVersion;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["seeds"] = seeds;
  j["jobs"] = jobs;
  json d;
  d["root"] = data.root;
  d["image_size"] = data.image_size;
  d["n_train_per_domain"] = data.n_train_per_domain;
  d["n_eval_per_domain"] = data.n_eval_per_domain;
  d["gaze_seed"] = data.gaze_seed;
  d["domains"] = json::array();
  for (const auto& ds : data.domains) {
    json dj;
    dj["name"] = ds.name;
    dj["seed"] = ds.seed;
    dj["illumination"] = interval_json(ds.illumination);
    dj["tint"] = interval_json(ds.tint);
    dj["blur_sigma"] = interval_json(ds.blur_sigma);
    dj["noise_sigma"] = interval_json(ds.noise_sigma);
    dj["background_level"] = interval_json(ds.background_level);
    d["domains"].push_back(dj);
  }
  j["data"] = d;
  json n;
  n["preset"] = network.preset;
  n["image_size"] = network.image_size;
  n["trunk_channels"] = network.trunk_channels;
  n["gn_groups"] = network.gn_groups;
  n["reduction_ratio"] = network.reduction_ratio;
  n["g_hidden"] = network.g_hidden;
  n["c_hidden"] = network.c_hidden;
  n["norm_mean"] = network.norm_mean;
  n["norm_std"] = network.norm_std;
  j["network"] = n;
  json a;
  a["width"] = augmix.width;
  a["max_depth"] = augmix.max_depth;
  a["severity"] = augmix.severity;
  a["dirichlet_alpha"] = augmix.dirichlet_alpha;
  a["beta_alpha"] = augmix.beta_alpha;
  j["augmix"] = a;
  j["ft_blend"] = json{{"lambda_max", ft_blend.lambda_max}};
  json t;
  t["mode"] = train.mode;
  t["intervention"] = intervention_name(train.intervention);
  t["flags"] = json{{"intr", train.flags.intr}, {"fact", train.flags.fact},
                    {"attn", train.flags.attn}};
  t["epochs"] = train.epochs;
  t["batch_size"] = train.batch_size;
  t["lr"] = train.lr;
  t["adam_beta1"] = train.adam_beta1;
  t["adam_beta2"] = train.adam_beta2;
  t["loss_weights"] = json{{"con", train.loss_weights.con}, {"fac", train.loss_weights.fac},
                           {"gaze", train.loss_weights.gaze}};
  t["checkpoint_every"] = train.checkpoint_every;
  j["train"] = t;
  j["tasks"] = json::array();
  for (const auto& ts : tasks)
    j["tasks"].push_back(json{{"name", ts.name}, {"train_domain", ts.train_domain},
                              {"test_domain", ts.test_domain}});
  return j;
}

void ExperimentConfig::validate() const {
  if (train.mode != "cauge" && train.mode != "baseline")
    throw ConfigError("config: train.mode must be 'cauge' or 'baseline', got '" + train.mode + "'");
  if (train.epochs < 1) throw ConfigError("config: train.epochs must be >= 1");
  if (train.batch_size < 2) throw ConfigError("config: train.batch_size must be >= 2");
  if (!(train.lr > 0.0)) throw ConfigError("config: train.lr must be > 0");
  if (train.checkpoint_every < 0) throw ConfigError("config: train.checkpoint_every must be >= 0");
  if (!(ft_blend.lambda_max >= 0.0 && ft_blend.lambda_max <= 1.0))
    throw ConfigError("config: ft_blend.lambda_max must be in [0,1]");
  train.loss_weights.validate();
  augmix.validate();
  if (data.image_size < 32) throw ConfigError("config: data.image_size must be >= 32");
  if (data.n_train_per_domain < 1 || data.n_eval_per_domain < 1)
    throw ConfigError("config: per-domain sample counts must be >= 1");
  std::set<std::string> names;
  for (const auto& d : data.domains) {
    d.validate();
    if (!names.insert(d.name).second)
      throw ConfigError("config: duplicate domain name '" + d.name + "'");
  }
  network.validate();
  if (network.image_size != data.image_size)
    throw ConfigError("config: network.image_size must equal data.image_size");
  std::set<std::string> task_names;
  for (const auto& t : tasks) {
    if (!task_names.insert(t.name).second)
      throw ConfigError("config: duplicate task name '" + t.name + "'");
    if (!names.count(t.train_domain))
      throw ConfigError("config: task '" + t.name + "' references unknown train_domain '" +
                        t.train_domain + "'");
    if (!names.count(t.test_domain))
      throw ConfigError("config: task '" + t.name + "' references unknown test_domain '" +
                        t.test_domain + "'");
    if (t.train_domain == t.test_domain)
      throw ConfigError("config: task '" + t.name + "' must have disjoint train/test domains");
  }
}

const datagen::DomainSpec& ExperimentConfig::find_domain(const std::string& name) const {
  for (const auto& d : data.domains)
    if (d.name == name) return d;
  throw ConfigError("config: unknown domain '" + name + "'");
}

const TaskSpec& ExperimentConfig::find_task(const std::string& name) const {
  for (const auto& t : tasks)
    if (t.name == name) return t;
  throw ConfigError("config: unknown task '" + name + "'");
}

std::vector<uint64_t> ExperimentConfig::seed_list() const {
  return seeds.empty() ? std::vector<uint64_t>{seed} : seeds;
}

std::string ExperimentConfig::resolved_out_dir() const {
  fs::path p(out_dir);
  if (p.is_relative()) {
    if (const char* root = std::getenv("CAUGE_OUT_ROOT")) p = fs::path(root) / p;
  }
  return p.string();
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& dir) {
  fs::create_directories(dir);
  std::ofstream f(fs::path(dir) / "config.json");
  if (!f) throw IoError("cannot write resolved config in " + dir);
  f << cfg.to_json().dump(2) << "\n";
}

}  // namespace cauge
