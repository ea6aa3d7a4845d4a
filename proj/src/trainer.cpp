#include "cauge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "cauge/intervene.hpp"
#include "cauge/kernels.hpp"
#include "cauge/losses.hpp"

namespace fs = std::filesystem;

namespace cauge::train {

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void append_field(std::string& line, const char* key, double v) {
  line += ",\"";
  line += key;
  line += "\":";
  line += fmt17(v);
}

}  // namespace

bool StepMetrics::all_finite() const {
  auto ok = [](const std::optional<double>& v) { return !v || std::isfinite(*v); };
  return std::isfinite(l_gaze) && ok(l_cls) && ok(l_con) && ok(l_fac) && ok(l_prim) &&
         ok(cls_accuracy);
}

// ---------------------------------------------------------------------------
// MetricsWriter
// ---------------------------------------------------------------------------

MetricsWriter::MetricsWriter(const std::string& path, bool append) : path_(path) {
  out_ = new std::ofstream(path, append ? std::ios::app : std::ios::trunc);
  if (!*out_) {
    delete out_;
    out_ = nullptr;
    throw IoError("cannot open metrics file: " + path);
  }
}

MetricsWriter::~MetricsWriter() { delete out_; }

void MetricsWriter::write(const StepMetrics& m) {
  std::string line = "{\"kind\":\"step\",\"epoch\":" + std::to_string(m.epoch) +
                     ",\"step\":" + std::to_string(m.step) +
                     ",\"global_step\":" + std::to_string(m.global_step);
  if (m.l_cls) append_field(line, "l_cls", *m.l_cls);
  if (m.l_con) append_field(line, "l_con", *m.l_con);
  if (m.l_fac) append_field(line, "l_fac", *m.l_fac);
  append_field(line, "l_gaze", m.l_gaze);
  if (m.l_prim) append_field(line, "l_prim", *m.l_prim);
  if (m.cls_accuracy) append_field(line, "classifier_accuracy", *m.cls_accuracy);
  *out_ << line << "}\n";
  out_->flush();
}

void MetricsWriter::write(const EpochSummary& s) {
  std::string line = "{\"kind\":\"epoch\",\"epoch\":" + std::to_string(s.epoch) +
                     ",\"steps\":" + std::to_string(s.steps);
  append_field(line, "mean_l_gaze", s.mean_l_gaze);
  if (s.mean_l_prim) append_field(line, "mean_l_prim", *s.mean_l_prim);
  if (s.mean_cls_accuracy) append_field(line, "mean_classifier_accuracy", *s.mean_cls_accuracy);
  *out_ << line << "}\n";
  out_->flush();
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(double lr, double beta1, double beta2, std::vector<int> param_indices)
    : lr_(lr), beta1_(beta1), beta2_(beta2), indices_(std::move(param_indices)) {}

void Adam::step(nets::ModelParams& params, ad::Tape& tape, const nets::Bound& bound) {
  if (m_.empty()) {
    m_.reserve(indices_.size());
    v_.reserve(indices_.size());
    for (int idx : indices_) {
      m_.emplace_back(params.items[static_cast<size_t>(idx)].value.shape());
      v_.emplace_back(params.items[static_cast<size_t>(idx)].value.shape());
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t k = 0; k < indices_.size(); ++k) {
    const int idx = indices_[k];
    Tensor& p = params.items[static_cast<size_t>(idx)].value;
    const ad::VarId leaf = bound.ids[static_cast<size_t>(idx)];
    Tensor zeros;
    const double* g;
    if (tape.has_grad(leaf)) {
      g = tape.grad(leaf).data();
    } else {
      zeros = Tensor(p.shape());
      g = zeros.data();
    }
    kernels::active().adam_step(p.data(), g, m_[k].data(), v_[k].data(), p.numel(), lr_,
                                beta1_, beta2_, kEps, bc1, bc2);
  }
}

OptimizerState Adam::export_state(const nets::ModelParams& params) const {
  OptimizerState st;
  st.t = t_;
  for (size_t k = 0; k < indices_.size(); ++k) {
    const auto& name = params.items[static_cast<size_t>(indices_[k])].name;
    AdamTensors mv;
    mv.m = m_.empty() ? Tensor(params.items[static_cast<size_t>(indices_[k])].value.shape())
                      : m_[k];
    mv.v = m_.empty() ? Tensor(params.items[static_cast<size_t>(indices_[k])].value.shape())
                      : v_[k];
    st.slots.emplace(name, std::move(mv));
  }
  return st;
}

void Adam::import_state(const nets::ModelParams& params, const OptimizerState& st) {
  t_ = st.t;
  m_.clear();
  v_.clear();
  for (int idx : indices_) {
    const auto& item = params.items[static_cast<size_t>(idx)];
    const auto it = st.slots.find(item.name);
    if (it == st.slots.end())
      throw StateError("optimizer state missing slot for '" + item.name + "'");
    if (it->second.m.shape() != item.value.shape())
      throw DimensionError("optimizer slot '" + item.name + "' has shape " +
                           it->second.m.shape_str() + " but the model expects " +
                           item.value.shape_str());
    m_.push_back(it->second.m);
    v_.push_back(it->second.v);
  }
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(const ExperimentConfig& cfg, datagen::Dataset train_data, uint64_t seed)
    : cfg_(cfg),
      data_(std::move(train_data)),
      seed_(seed),
      model_(cfg.network),
      adam_main_(cfg.train.lr, cfg.train.adam_beta1, cfg.train.adam_beta2,
                 model_.params().owned_by_main()),
      adam_cls_(cfg.train.lr, cfg.train.adam_beta1, cfg.train.adam_beta2,
                model_.params().owned_by(nets::Owner::C)) {
  if (data_.samples.empty()) throw std::invalid_argument("Trainer: empty training dataset");
  // Eq. 8's two argmins demand disjoint parameter sets
  std::set<int> main_set(adam_main_.indices().begin(), adam_main_.indices().end());
  for (int idx : adam_cls_.indices())
    if (main_set.count(idx))
      throw StateError("optimizer parameter sets overlap; the adversarial split is broken");
  if (main_set.size() + adam_cls_.indices().size() != model_.params().items.size())
    throw StateError("optimizer parameter sets do not cover the model");
  model_.init_weights(derive_seed(seed_, "model-init"));
}

bool Trainer::baseline_path() const {
  return cfg_.train.mode == "baseline" || cfg_.train.flags.all_off();
}

void Trainer::resume(const CheckpointRecord& rec) {
  apply_params(rec, model_);
  adam_main_.import_state(model_.params(), rec.adam_main);
  adam_cls_.import_state(model_.params(), rec.adam_cls);
  start_epoch_ = static_cast<int>(rec.epochs_completed);
  global_step_ = rec.global_step;
}

datagen::ImageSample Trainer::intervene_sample(const datagen::ImageSample& s, Rng& rng,
                                               const std::vector<int>& batch_indices,
                                               int position_in_batch) const {
  datagen::ImageSample out = s;  // label, domain, index, nuisance carried over
  if (cfg_.train.intervention == Intervention::Augmix) {
    out.image = intervene::augmix(s.image, cfg_.augmix, rng);
  } else {
    // donor: a different sample of the same batch (same source domain)
    const int b = static_cast<int>(batch_indices.size());
    int donor_pos = position_in_batch;
    if (b > 1)
      donor_pos = (position_in_batch + 1 +
                   static_cast<int>(rng.uniform_index(static_cast<uint64_t>(b - 1)))) % b;
    const auto& donor = data_.samples[static_cast<size_t>(batch_indices[static_cast<size_t>(donor_pos)])];
    const double lambda = rng.uniform(0.0, cfg_.ft_blend.lambda_max);
    out.image = intervene::fourier_amplitude_blend(s.image, donor.image, lambda);
  }
  return out;
}

StepMetrics Trainer::train_step(const std::vector<int>& batch_indices, int epoch, int step) {
  const int B = static_cast<int>(batch_indices.size());
  if (B < 2) throw std::invalid_argument("train_step: batch size must be >= 2");

  std::vector<const Image*> imgs(static_cast<size_t>(B));
  std::vector<datagen::GazeLabel> labels(static_cast<size_t>(B));
  for (int i = 0; i < B; ++i) {
    const auto& s = data_.samples[static_cast<size_t>(batch_indices[static_cast<size_t>(i)])];
    imgs[static_cast<size_t>(i)] = &s.image;
    labels[static_cast<size_t>(i)] = s.label;
  }
  const Tensor x_s = nets::batch_images(imgs);
  const Tensor y = nets::batch_labels(labels);

  StepMetrics m;
  m.epoch = epoch;
  m.step = step;
  m.global_step = global_step_;

  const auto fail_dump = [&](const char* what) {
    std::ostringstream os;
    os << what << " at epoch " << epoch << " step " << step << "; batch indices [";
    for (int i = 0; i < B; ++i) os << (i ? "," : "") << batch_indices[static_cast<size_t>(i)];
    os << "]";
    throw NumericError(os.str());
  };

  if (baseline_path()) {
    ad::Tape t;
    const nets::Bound b =
        model_.bind(t, {nets::Owner::F, nets::Owner::AL, nets::Owner::G});
    const ad::VarId z = model_.feature_extract(t, b, t.constant(x_s));
    const ad::VarId yhat = model_.predict_gaze(t, b, z);
    const ad::VarId loss = losses::l1_mean(t, t.constant(y), yhat);
    m.l_gaze = t.scalar(loss);
    if (!m.all_finite()) fail_dump("non-finite baseline loss");
    t.backward(loss);
    adam_main_.step(model_.params(), t, b);
    ++global_step_;
    return m;
  }

  // augmented stream, one deterministic rng stream per (seed, epoch, slot)
  std::vector<datagen::ImageSample> augmented(static_cast<size_t>(B));
  for (int i = 0; i < B; ++i) {
    const uint64_t slot = static_cast<uint64_t>(step) * static_cast<uint64_t>(cfg_.train.batch_size) +
                          static_cast<uint64_t>(i);
    Rng rng(derive_seed(seed_, "aug", static_cast<uint64_t>(epoch), slot));
    augmented[static_cast<size_t>(i)] = intervene_sample(
        data_.samples[static_cast<size_t>(batch_indices[static_cast<size_t>(i)])], rng,
        batch_indices, i);
  }
  std::vector<const Image*> aug_imgs(static_cast<size_t>(B));
  for (int i = 0; i < B; ++i) aug_imgs[static_cast<size_t>(i)] = &augmented[static_cast<size_t>(i)].image;
  const Tensor x_a = nets::batch_images(aug_imgs);

  const bool intr = cfg_.train.flags.intr;
  const bool fact = cfg_.train.flags.fact;
  const bool attn = cfg_.train.flags.attn;

  // ---- Phase A: classifier step on detached features ----
  if (intr) {
    Tensor zs_detached, za_detached;
    {
      ad::Tape t0;
      t0.set_recording(false);
      const nets::Bound b0 = model_.bind_frozen(t0);
      zs_detached = t0.value(model_.feature_extract(t0, b0, t0.constant(x_s)));
      za_detached = t0.value(model_.feature_extract(t0, b0, t0.constant(x_a)));
    }
    ad::Tape ta;
    const nets::Bound bc = model_.bind(ta, {nets::Owner::C});
    const ad::VarId ls = model_.classify_intervention(ta, bc, ta.constant(zs_detached));
    const ad::VarId la = model_.classify_intervention(ta, bc, ta.constant(za_detached));
    const ad::VarId lcls = losses::loss_cls(ta, ls, la);
    m.l_cls = ta.scalar(lcls);
    int correct = 0;
    for (int i = 0; i < B; ++i) {
      if (ta.value(ls)[i] > 0.0) ++correct;   // original predicted as original
      if (ta.value(la)[i] <= 0.0) ++correct;  // augmented predicted as augmented
    }
    m.cls_accuracy = static_cast<double>(correct) / (2.0 * B);
    ta.backward(lcls);
    adam_cls_.step(model_.params(), ta, bc);
  }

  // ---- Phase B: F/AL/G step through the frozen classifier ----
  {
    ad::Tape tb;
    const nets::Bound bb =
        model_.bind(tb, {nets::Owner::F, nets::Owner::AL, nets::Owner::G});
    const ad::VarId zs = model_.feature_extract(tb, bb, tb.constant(x_s));
    const ad::VarId za = model_.feature_extract(tb, bb, tb.constant(x_a));

    std::optional<ad::VarId> lcon, lfac;
    if (intr) lcon = losses::loss_con(tb, model_.classify_intervention(tb, bb, za));
    if (fact) lfac = losses::loss_fac(tb, losses::correlation_matrix(tb, zs, za));

    ad::VarId zw_s = zs, zw_a = za;
    if (attn) {
      zw_s = tb.mul(zs, model_.attention(tb, bb, zs));
      zw_a = tb.mul(za, model_.attention(tb, bb, za));
    }
    const ad::VarId yhat_s = model_.predict_gaze(tb, bb, zw_s);
    const ad::VarId yhat_a = model_.predict_gaze(tb, bb, zw_a);
    const ad::VarId yc = tb.constant(y);
    const ad::VarId lgaze = losses::loss_gaze(tb, yc, yhat_s, yhat_a);

    ad::VarId lprim = tb.scale(lgaze, cfg_.train.loss_weights.gaze);
    if (lcon) lprim = tb.add(lprim, tb.scale(*lcon, cfg_.train.loss_weights.con));
    if (lfac) lprim = tb.add(lprim, tb.scale(*lfac, cfg_.train.loss_weights.fac));

    m.l_gaze = tb.scalar(lgaze);
    if (lcon) m.l_con = tb.scalar(*lcon);
    if (lfac) m.l_fac = tb.scalar(*lfac);
    m.l_prim = tb.scalar(lprim);
    if (!m.all_finite()) fail_dump("non-finite loss");
    tb.backward(lprim);
    adam_main_.step(model_.params(), tb, bb);
  }

  ++global_step_;
  return m;
}

CheckpointRecord Trainer::make_checkpoint(int64_t epochs_completed) const {
  CheckpointRecord rec;
  ExperimentConfig snap = cfg_;
  snap.seed = seed_;
  rec.config_json = snap.to_json().dump();
  rec.epochs_completed = epochs_completed;
  rec.global_step = global_step_;
  rec.params = model_.params();
  rec.adam_main = adam_main_.export_state(model_.params());
  rec.adam_cls = adam_cls_.export_state(model_.params());
  return rec;
}

TrainResult Trainer::run(MetricsWriter* sink, const std::string& out_dir) {
  TrainResult result;
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const int n = static_cast<int>(data_.samples.size());
  const int bs = cfg_.train.batch_size;

  for (int epoch = start_epoch_; epoch < cfg_.train.epochs; ++epoch) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(seed_, "shuffle", static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double sum_gaze = 0.0, sum_prim = 0.0, sum_acc = 0.0;
    int steps = 0, acc_steps = 0, prim_steps = 0;
    for (int off = 0, step = 0; off < n; off += bs, ++step) {
      const int take = std::min(bs, n - off);
      if (take < 2) break;  // correlation matrix needs at least 2 samples
      std::vector<int> batch(order.begin() + off, order.begin() + off + take);
      StepMetrics sm = train_step(batch, epoch, step);
      sum_gaze += sm.l_gaze;
      if (sm.l_prim) {
        sum_prim += *sm.l_prim;
        ++prim_steps;
      }
      if (sm.cls_accuracy) {
        sum_acc += *sm.cls_accuracy;
        ++acc_steps;
      }
      ++steps;
      if (sink) sink->write(sm);
      result.steps.push_back(std::move(sm));
    }

    EpochSummary es;
    es.epoch = epoch;
    es.steps = steps;
    es.mean_l_gaze = steps ? sum_gaze / steps : 0.0;
    if (prim_steps) es.mean_l_prim = sum_prim / prim_steps;
    if (acc_steps) es.mean_cls_accuracy = sum_acc / acc_steps;
    if (sink) sink->write(es);
    result.epochs.push_back(es);

    if (!out_dir.empty() && cfg_.train.checkpoint_every > 0 &&
        (epoch + 1) % cfg_.train.checkpoint_every == 0 && epoch + 1 < cfg_.train.epochs) {
      save_checkpoint(make_checkpoint(epoch + 1),
                      (fs::path(out_dir) / ("ckpt_epoch_" + std::to_string(epoch + 1) + ".bin"))
                          .string());
    }
  }

  if (!out_dir.empty()) {
    result.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
    save_checkpoint(make_checkpoint(cfg_.train.epochs), result.checkpoint_path);
  }
  return result;
}

}  // namespace cauge::train
