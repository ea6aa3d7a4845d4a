#include <doctest.h>

#include <cmath>
#include <vector>

#include "cauge/losses.hpp"
#include "cauge/nets.hpp"
#include "cauge/rng.hpp"
#include "cauge/trainer.hpp"

using namespace cauge;
using namespace cauge::losses;
using ad::Tape;
using ad::VarId;

namespace {

Tensor column(const std::vector<double>& v) {
  Tensor t({static_cast<int>(v.size()), 1});
  for (size_t i = 0; i < v.size(); ++i) t[static_cast<int64_t>(i)] = v[i];
  return t;
}

Tensor random_batch(int b, int n, Rng& rng, double scale = 1.0) {
  Tensor t({b, n});
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.normal();
  return t;
}

// brute-force Pearson correlation between column i of A and column j of B
double pearson(const Tensor& A, int i, const Tensor& B, int j) {
  const int n = A.dim(0);
  double ma = 0, mb = 0;
  for (int k = 0; k < n; ++k) {
    ma += A.at(k, i);
    mb += B.at(k, j);
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (int k = 0; k < n; ++k) {
    const double da = A.at(k, i) - ma, db = B.at(k, j) - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  return cov / std::sqrt(va * vb);
}

double eval_loss_cls_naive(const std::vector<double>& ls, const std::vector<double>& la) {
  // probability-space reference
  double s = 0;
  for (double l : ls) s += -std::log(1.0 / (1.0 + std::exp(-l)));
  s /= static_cast<double>(ls.size());
  double a = 0;
  for (double l : la) a += -std::log(1.0 - 1.0 / (1.0 + std::exp(-l)));
  a /= static_cast<double>(la.size());
  return s + a;
}

}  // namespace

TEST_CASE("loss_cls: limits, closed form, and probability-space oracle") {
  Tape t;
  SUBCASE("perfect classifier limit") {
    const VarId ls = t.constant(column({30.0, 25.0}));
    const VarId la = t.constant(column({-30.0, -28.0}));
    CHECK(t.scalar(loss_cls(t, ls, la)) < 1e-10);
  }
  SUBCASE("all-zero logits give 2 ln 2") {
    const VarId ls = t.constant(column({0.0, 0.0, 0.0}));
    const VarId la = t.constant(column({0.0, 0.0, 0.0}));
    CHECK(t.scalar(loss_cls(t, ls, la)) == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("matches the naive implementation for logits in [-10, 10]") {
    Rng rng(44);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> ls(5), la(7);
      for (auto& v : ls) v = rng.uniform(-10.0, 10.0);
      for (auto& v : la) v = rng.uniform(-10.0, 10.0);
      Tape tt;
      const double got = tt.scalar(loss_cls(tt, tt.constant(column(ls)), tt.constant(column(la))));
      CHECK(std::abs(got - eval_loss_cls_naive(ls, la)) < 1e-9);
    }
  }
  SUBCASE("empty batch is rejected") {
    const VarId empty = t.constant(Tensor({0, 1}));
    const VarId ok = t.constant(column({0.0}));
    CHECK_THROWS_AS(loss_cls(t, empty, ok), std::invalid_argument);
  }
}

TEST_CASE("loss_con: closed form, limit, monotonicity") {
  Tape t;
  CHECK(t.scalar(loss_con(t, t.constant(column({0.0, 0.0})))) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(t.scalar(loss_con(t, t.constant(column({30.0})))) < 1e-10);
  const double at0 = t.scalar(loss_con(t, t.constant(column({0.0}))));
  const double at2 = t.scalar(loss_con(t, t.constant(column({2.0}))));
  CHECK(at2 < at0);
  CHECK_THROWS_AS(loss_con(t, t.constant(Tensor({0, 1}))), std::invalid_argument);
}

TEST_CASE("correlation_matrix: self, anti, oracle, and rescaling invariance") {
  Rng rng(55);
  SUBCASE("self-correlation diagonal is 1") {
    Tape t;
    const Tensor z = random_batch(16, 4, rng);
    const VarId m = correlation_matrix(t, t.constant(z), t.constant(z));
    for (int i = 0; i < 4; ++i) CHECK(t.value(m).at(i, i) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("negated column correlates to -1") {
    Tape t;
    const Tensor zs = random_batch(16, 3, rng);
    Tensor za = zs;
    for (int k = 0; k < 16; ++k) za.at(k, 2) = -zs.at(k, 0);
    const VarId m = correlation_matrix(t, t.constant(zs), t.constant(za));
    CHECK(t.value(m).at(0, 2) == doctest::Approx(-1.0).epsilon(1e-9));
  }
  SUBCASE("agrees with brute-force Pearson within 1e-10") {
    for (int trial = 0; trial < 25; ++trial) {
      Tape t;
      const Tensor zs = random_batch(16, 4, rng);
      const Tensor za = random_batch(16, 4, rng);
      const VarId m = correlation_matrix(t, t.constant(zs), t.constant(za));
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
          CHECK(std::abs(t.value(m).at(i, j) - pearson(zs, i, za, j)) < 1e-10);
    }
  }
  SUBCASE("entries bounded by 1 and invariant to positive affine rescaling") {
    Tape t;
    const Tensor zs = random_batch(12, 5, rng);
    const Tensor za = random_batch(12, 5, rng);
    const VarId m0 = correlation_matrix(t, t.constant(zs), t.constant(za));
    Tensor zs2 = zs, za2 = za;
    Rng srng(66);
    for (int j = 0; j < 5; ++j) {
      const double s1 = srng.uniform(0.1, 5.0), o1 = srng.uniform(-3.0, 3.0);
      const double s2 = srng.uniform(0.1, 5.0), o2 = srng.uniform(-3.0, 3.0);
      for (int k = 0; k < 12; ++k) {
        zs2.at(k, j) = s1 * zs.at(k, j) + o1;
        za2.at(k, j) = s2 * za.at(k, j) + o2;
      }
    }
    const VarId m1 = correlation_matrix(t, t.constant(zs2), t.constant(za2));
    for (int64_t i = 0; i < t.value(m0).numel(); ++i) {
      CHECK(std::abs(t.value(m0)[i]) <= 1.0 + 1e-6);
      CHECK(std::abs(t.value(m0)[i] - t.value(m1)[i]) < 1e-8);
    }
  }
  SUBCASE("batch of 1 is rejected") {
    Tape t;
    CHECK_THROWS_AS(
        correlation_matrix(t, t.constant(random_batch(1, 3, rng)),
                           t.constant(random_batch(1, 3, rng))),
        std::invalid_argument);
  }
}

TEST_CASE("loss_fac: identity, hand example, non-square rejection") {
  Tape t;
  CHECK(t.scalar(loss_fac(t, t.constant(Tensor::identity(6)))) == 0.0);  // exactly
  const Tensor m2 = Tensor::from({2, 2}, {1.0, 0.5, 0.5, 1.0});
  CHECK(t.scalar(loss_fac(t, t.constant(m2))) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK_THROWS_AS(loss_fac(t, t.constant(Tensor({2, 3}))), DimensionError);
}

TEST_CASE("loss_gaze: zero at perfect prediction, hand example, permutation invariance") {
  Tape t;
  const Tensor y = Tensor::from({1, 2}, {0.0, 0.0});
  SUBCASE("perfect") {
    const VarId l = loss_gaze(t, t.constant(y), t.constant(y), t.constant(y));
    CHECK(t.scalar(l) == 0.0);
  }
  SUBCASE("hand example: 0.5*0.2 + 0.5*0.4 = 0.3") {
    const VarId l = loss_gaze(t, t.constant(y), t.constant(Tensor::from({1, 2}, {0.2, 0.0})),
                              t.constant(Tensor::from({1, 2}, {0.0, 0.4})));
    CHECK(t.scalar(l) == doctest::Approx(0.3).epsilon(1e-12));
  }
  SUBCASE("permutation invariance over the batch") {
    Rng rng(77);
    const Tensor yb = random_batch(6, 2, rng);
    const Tensor ps = random_batch(6, 2, rng);
    const Tensor pa = random_batch(6, 2, rng);
    Tensor yb2({6, 2}), ps2({6, 2}), pa2({6, 2});
    const int perm[6] = {4, 2, 0, 5, 1, 3};
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 2; ++j) {
        yb2.at(i, j) = yb.at(perm[i], j);
        ps2.at(i, j) = ps.at(perm[i], j);
        pa2.at(i, j) = pa.at(perm[i], j);
      }
    const double l1 =
        t.scalar(loss_gaze(t, t.constant(yb), t.constant(ps), t.constant(pa)));
    const double l2 =
        t.scalar(loss_gaze(t, t.constant(yb2), t.constant(ps2), t.constant(pa2)));
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(
        loss_gaze(t, t.constant(y), t.constant(Tensor({2, 2})), t.constant(Tensor({1, 2}))),
        DimensionError);
  }
}

TEST_CASE("loss_prim: weighted sums and non-finite rejection") {
  Tape t;
  const LossWeights w;
  const auto c = [&](double v) { return t.constant(Tensor::scalar(v)); };
  CHECK(t.scalar(loss_prim(t, c(1), c(1), c(1), w)) == doctest::Approx(10.0));
  CHECK(t.scalar(loss_prim(t, c(0), c(0), c(0), w)) == 0.0);
  CHECK(t.scalar(loss_prim(t, c(0.5), c(1), c(2), w)) == doctest::Approx(13.5));
  CHECK_THROWS_AS(loss_prim(t, c(std::nan("")), c(0), c(0), w), NumericError);
  LossWeights bad;
  bad.fac = -1.0;
  CHECK_THROWS_AS(loss_prim(t, c(1), c(1), c(1), bad), ConfigError);
}

TEST_CASE("plain gradient descent on C monotonically decreases loss_cls") {
  // frozen random features, C alone; small-step GD must descend each step
  nets::NetConfig cfg;
  cfg.image_size = 16;
  cfg.trunk_channels = {4, 8};
  cfg.gn_groups = 2;
  cfg.g_hidden = 4;
  cfg.c_hidden = 6;
  nets::Model model(cfg);
  model.init_weights(808);

  Rng rng(909);
  const Tensor zs = random_batch(12, 8, rng);
  const Tensor za = random_batch(12, 8, rng);

  double prev = 1e300;
  for (int it = 0; it < 100; ++it) {
    ad::Tape t;
    const nets::Bound b = model.bind(t, {nets::Owner::C});
    const VarId l = loss_cls(t, model.classify_intervention(t, b, t.constant(zs)),
                             model.classify_intervention(t, b, t.constant(za)));
    const double cur = t.scalar(l);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
    t.backward(l);
    for (int idx : model.params().owned_by(nets::Owner::C)) {
      const VarId leaf = b.ids[static_cast<size_t>(idx)];
      if (!t.has_grad(leaf)) continue;
      Tensor& p = model.params().items[static_cast<size_t>(idx)].value;
      const Tensor& g = t.grad(leaf);
      for (int64_t k = 0; k < p.numel(); ++k) p[k] -= 0.05 * g[k];
    }
  }
  CHECK(prev < 2.0 * std::log(2.0));  // moved below the zero-logit plateau
}
