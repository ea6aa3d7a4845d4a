#include "cauge/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace cauge::losses {

namespace {

constexpr double kZscoreEps = 1e-8;    // added to the per-dimension std
constexpr double kSqrtShift = 1e-24;   // keeps sqrt differentiable at 0
constexpr double kNormProdEps = 1e-12; // guards the |zs_i||za_j| product

void check_logits(ad::Tape& t, ad::VarId logits, const char* who) {
  const Tensor& v = t.value(logits);
  if (v.numel() == 0) throw std::invalid_argument(std::string(who) + ": empty batch");
  if (v.rank() > 2 || (v.rank() == 2 && v.dim(1) != 1))
    throw DimensionError(std::string(who) + ": logits must be [B] or [B,1], got " + v.shape_str());
}

// per-dimension Z-score across the batch
ad::VarId zscore(ad::Tape& t, ad::VarId z) {
  const ad::VarId centered = t.sub_row(z, t.col_mean(z));
  const ad::VarId var = t.col_mean(t.square(centered));  // population variance
  const ad::VarId denom = t.add_scalar(t.sqrt_shift(var, kSqrtShift), kZscoreEps);
  return t.div_row(centered, denom);
}

}  // namespace

void LossWeights::validate() const {
  if (con < 0.0 || fac < 0.0 || gaze < 0.0)
    throw ConfigError("loss weights must be non-negative");
}

ad::VarId loss_cls(ad::Tape& t, ad::VarId logits_s, ad::VarId logits_a) {
  check_logits(t, logits_s, "loss_cls");
  check_logits(t, logits_a, "loss_cls");
  // -log sigma(x) = softplus(-x); -log(1 - sigma(x)) = softplus(x)
  const ad::VarId term_s = t.mean_all(t.softplus(t.scale(logits_s, -1.0)));
  const ad::VarId term_a = t.mean_all(t.softplus(logits_a));
  return t.add(term_s, term_a);
}

ad::VarId loss_con(ad::Tape& t, ad::VarId logits_a) {
  check_logits(t, logits_a, "loss_con");
  return t.mean_all(t.softplus(t.scale(logits_a, -1.0)));
}

ad::VarId correlation_matrix(ad::Tape& t, ad::VarId zs, ad::VarId za) {
  const Tensor& vs = t.value(zs);
  const Tensor& va = t.value(za);
  if (vs.rank() != 2 || va.rank() != 2)
    throw DimensionError("correlation_matrix: inputs must be [B,N]");
  if (vs.dim(0) != va.dim(0))
    throw DimensionError("correlation_matrix: batch sizes differ, " + vs.shape_str() + " vs " +
                         va.shape_str());
  if (vs.dim(0) < 2)
    throw std::invalid_argument("correlation_matrix: batch size must be >= 2 (Z-score undefined)");

  const ad::VarId hs = zscore(t, zs);
  const ad::VarId ha = zscore(t, za);
  const ad::VarId inner = t.matmul_tn(hs, ha);  // [N1,N2] of batch inner products
  const ad::VarId ns = t.sqrt_shift(t.col_sum(t.square(hs)), kSqrtShift);  // [1,N1]
  const ad::VarId na = t.sqrt_shift(t.col_sum(t.square(ha)), kSqrtShift);  // [1,N2]
  const ad::VarId denom = t.add_scalar(t.matmul_tn(ns, na), kNormProdEps);
  return t.div(inner, denom);
}

ad::VarId loss_fac(ad::Tape& t, ad::VarId corr) {
  if (t.value(corr).rank() != 2 || t.value(corr).dim(0) != t.value(corr).dim(1))
    throw DimensionError("loss_fac: correlation matrix must be square, got " +
                         t.value(corr).shape_str());
  const int n = t.value(corr).dim(0);
  const ad::VarId diff = t.sub(corr, t.constant(Tensor::identity(n)));
  return t.scale(t.sum_all(t.square(diff)), 0.5);
}

ad::VarId l1_mean(ad::Tape& t, ad::VarId y_const, ad::VarId yhat) {
  // note: value() references die on the next op call (node storage grows),
  // so sizes are copied out before building the graph
  if (!t.value(y_const).same_shape(t.value(yhat)))
    throw DimensionError("l1_mean: shapes differ, " + t.value(y_const).shape_str() + " vs " +
                         t.value(yhat).shape_str());
  const int batch = t.value(y_const).dim(0);
  if (batch == 0) throw std::invalid_argument("l1_mean: empty batch");
  const ad::VarId diff = t.abs(t.sub(yhat, y_const));
  return t.scale(t.sum_all(diff), 1.0 / batch);
}

ad::VarId loss_gaze(ad::Tape& t, ad::VarId y_s, ad::VarId yhat_s, ad::VarId yhat_a) {
  const ad::VarId l_s = l1_mean(t, y_s, yhat_s);
  const ad::VarId l_a = l1_mean(t, y_s, yhat_a);
  return t.add(t.scale(l_s, 0.5), t.scale(l_a, 0.5));
}

ad::VarId loss_prim(ad::Tape& t, ad::VarId l_con, ad::VarId l_fac, ad::VarId l_gaze,
                    const LossWeights& w) {
  w.validate();
  for (ad::VarId v : {l_con, l_fac, l_gaze})
    if (!std::isfinite(t.scalar(v)))
      throw NumericError("loss_prim: non-finite loss component");
  return t.add(t.add(t.scale(l_con, w.con), t.scale(l_fac, w.fac)), t.scale(l_gaze, w.gaze));
}

}  // namespace cauge::losses
