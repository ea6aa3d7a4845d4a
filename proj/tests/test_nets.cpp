#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "cauge/checkpoint.hpp"
#include "cauge/config.hpp"
#include "cauge/kernels.hpp"
#include "cauge/nets.hpp"

using namespace cauge;
using namespace cauge::nets;
namespace fs = std::filesystem;

namespace {

NetConfig small_config() {
  NetConfig cfg;
  cfg.image_size = 16;
  cfg.trunk_channels = {4, 8};
  cfg.gn_groups = 2;
  cfg.reduction_ratio = 8;
  cfg.g_hidden = 6;
  cfg.c_hidden = 5;
  return cfg;
}

Tensor random_images(int b, int size, uint64_t seed) {
  Rng rng(seed);
  Tensor t({b, 3, size, size});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform();
  return t;
}

}  // namespace

TEST_CASE("parameter partition: main and classifier sets are disjoint and cover") {
  Model m(small_config());
  const auto main_ids = m.params().owned_by_main();
  const auto cls_ids = m.params().owned_by(Owner::C);
  for (int i : main_ids)
    for (int j : cls_ids) CHECK(i != j);
  CHECK(main_ids.size() + cls_ids.size() == m.params().items.size());
}

TEST_CASE("feature_extract is deterministic and batch-shaped") {
  Model m(small_config());
  m.init_weights(101);
  const Tensor x = random_images(3, 16, 7);
  const Tensor z1 = m.features(x);
  const Tensor z2 = m.features(x);
  CHECK(z1.shape() == std::vector<int>{3, 8});
  for (int64_t i = 0; i < z1.numel(); ++i) CHECK(z1[i] == z2[i]);  // bitwise

  // identical rows in, identical rows out
  Tensor xx({2, 3, 16, 16});
  const int64_t per = 3 * 16 * 16;
  for (int64_t i = 0; i < per; ++i) {
    xx[i] = x[i];
    xx[per + i] = x[i];
  }
  const Tensor zz = m.features(xx);
  for (int j = 0; j < 8; ++j) CHECK(zz.at(0, j) == zz.at(1, j));
}

TEST_CASE("attention: zero parameters give 0.5 and outputs stay in (0,1)") {
  Model m(small_config());  // zero-initialized
  ad::Tape t;
  t.set_recording(false);
  const Bound b = m.bind_frozen(t);
  Rng rng(3);
  Tensor z({4, 8});
  for (int64_t i = 0; i < z.numel(); ++i) z[i] = rng.normal();
  const Tensor w = t.value(m.attention(t, b, t.constant(z)));
  for (int64_t i = 0; i < w.numel(); ++i) CHECK(w[i] == doctest::Approx(0.5));

  m.init_weights(11);
  ad::Tape t2;
  t2.set_recording(false);
  const Bound b2 = m.bind_frozen(t2);
  const Tensor w2 = t2.value(m.attention(t2, b2, t2.constant(z)));
  for (int64_t i = 0; i < w2.numel(); ++i) {
    CHECK(w2[i] > 0.0);
    CHECK(w2[i] < 1.0);
  }
}

TEST_CASE("reduction ratio 8 gives the contracted bottleneck width") {
  Model m(small_config());  // N = 8, r = 8 -> hidden 1
  const int idx = m.params().find("AL.fc1.w");
  REQUIRE(idx >= 0);
  CHECK(m.params().items[static_cast<size_t>(idx)].value.shape() == std::vector<int>{1, 8});

  NetConfig bad = small_config();
  bad.trunk_channels = {4, 12};  // 12 % 8 != 0
  bad.gn_groups = 2;
  CHECK_THROWS_AS(Model{bad}, ConfigError);
}

TEST_CASE("predict_gaze with zero input and zero final bias returns (0,0)") {
  Model m(small_config());
  m.init_weights(21);  // biases stay zero under the init policy
  ad::Tape t;
  t.set_recording(false);
  const Bound b = m.bind_frozen(t);
  const Tensor zeros({2, 8});
  const Tensor y = t.value(m.predict_gaze(t, b, t.constant(zeros)));
  CHECK(y.shape() == std::vector<int>{2, 2});
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0);
}

TEST_CASE("classifier: zero params -> probability 0.5; logit 20 saturates") {
  Model m(small_config());
  ad::Tape t;
  t.set_recording(false);
  const Bound b = m.bind_frozen(t);
  Tensor z({1, 8});
  z.fill(0.3);
  const Tensor logit = t.value(m.classify_intervention(t, b, t.constant(z)));
  CHECK(logit[0] == 0.0);  // zero params -> sigma = 0.5
  double p;
  kernels::sigmoid(logit.data(), &p, 1);
  CHECK(p == doctest::Approx(0.5));
  const double big = 20.0;
  kernels::sigmoid(&big, &p, 1);
  CHECK(p > 0.999999);
}

TEST_CASE("forward_inference equals the manual composition, batched or not") {
  Model m(small_config());
  m.init_weights(31);
  const Tensor x = random_images(5, 16, 13);
  const Tensor y = m.forward_inference(x);
  CHECK(y.shape() == std::vector<int>{5, 2});

  // manual composition
  ad::Tape t;
  t.set_recording(false);
  const Bound b = m.bind_frozen(t);
  const ad::VarId z = m.feature_extract(t, b, t.constant(x));
  const ad::VarId w = m.attention(t, b, z);
  const Tensor y2 = t.value(m.predict_gaze(t, b, t.mul(z, w)));
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == y2[i]);

  // single-sample path agrees with the batched one
  for (int s = 0; s < 5; ++s) {
    Tensor single({1, 3, 16, 16});
    const int64_t per = 3 * 16 * 16;
    for (int64_t i = 0; i < per; ++i) single[i] = x[s * per + i];
    const Tensor ys = m.forward_inference(single);
    CHECK(std::abs(ys[0] - y.at(s, 0)) < 1e-6);
    CHECK(std::abs(ys[1] - y.at(s, 1)) < 1e-6);
  }
}

TEST_CASE("checkpoint round-trip is bitwise and embeds the config") {
  ExperimentConfig cfg;
  cfg.data.image_size = 32;
  cfg.network = small_config();
  cfg.network.image_size = 32;
  cfg.data.domains.push_back({"a", 1, {0.8, 1.2}, {-0.05, 0.05}, {0, 0.5}, {0, 0.02}, {0.3, 0.7}});
  cfg.data.domains.push_back({"b", 2, {0.8, 1.2}, {-0.05, 0.05}, {0, 0.5}, {0, 0.02}, {0.3, 0.7}});
  cfg.tasks.push_back({"a->b", "a", "b"});

  train::CheckpointRecord rec;
  rec.config_json = cfg.to_json().dump();
  rec.epochs_completed = 3;
  rec.global_step = 42;
  Model m(cfg.network);
  m.init_weights(55);
  rec.params = m.params();
  rec.adam_main.t = 7;
  rec.adam_cls.t = 9;
  for (const auto& p : m.params().items) {
    train::AdamTensors mv;
    mv.m = Tensor(p.value.shape());
    mv.v = Tensor(p.value.shape());
    rec.adam_main.slots.emplace(p.name, mv);
  }

  const auto path = (fs::temp_directory_path() / "cauge_ckpt_test.bin").string();
  train::save_checkpoint(rec, path);
  const auto back = train::load_checkpoint(path);
  CHECK(back.epochs_completed == 3);
  CHECK(back.global_step == 42);
  CHECK(back.adam_main.t == 7);
  CHECK(back.adam_cls.t == 9);
  REQUIRE(back.params.items.size() == rec.params.items.size());
  for (size_t i = 0; i < rec.params.items.size(); ++i) {
    CHECK(back.params.items[i].name == rec.params.items[i].name);
    CHECK(tensor_hash(back.params.items[i].value) == tensor_hash(rec.params.items[i].value));
  }

  // loading into a different preset names the first mismatched tensor
  NetConfig other = small_config();
  other.trunk_channels = {8, 16};
  other.gn_groups = 2;
  Model wrong(other);
  try {
    train::apply_params(back, wrong);
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("F.block0.conv.w") != std::string::npos);
  }

  // model rebuilds from the embedded config
  const Model rebuilt = train::model_from_checkpoint(back);
  CHECK(rebuilt.params().hash() == m.params().hash());
  fs::remove(path);
}

TEST_CASE("checkpoint version mismatch is reported") {
  const auto path = (fs::temp_directory_path() / "cauge_ckpt_badver.bin").string();
  {
    std::ofstream f(path, std::ios::binary);
    f << "CAUGECK1";
    const uint32_t bad_version = 99;
    f.write(reinterpret_cast<const char*>(&bad_version), 4);
  }
  CHECK_THROWS_AS(train::load_checkpoint(path), StateError);
  fs::remove(path);
}

TEST_CASE("paper preset keeps the architecture contract") {
  const NetConfig paper = NetConfig::paper();
  paper.validate();
  CHECK(paper.feature_dim() == 512);
  CHECK(paper.feature_dim() % paper.reduction_ratio == 0);
}
