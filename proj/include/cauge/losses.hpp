#pragma once

#include "cauge/tape.hpp"

namespace cauge::losses {

struct LossWeights {
  double con = 3.0;
  double fac = 2.0;
  double gaze = 5.0;

  void validate() const;
};

// Intervention classification: mean -log sigma(logit_s) + mean -log(1 - sigma(logit_a)),
// computed in logit space (softplus form). logits are [B,1] or [B].
ad::VarId loss_cls(ad::Tape& t, ad::VarId logits_s, ad::VarId logits_a);

// Confusion loss on the inverted label: mean -log sigma(logit_a).
ad::VarId loss_con(ad::Tape& t, ad::VarId logits_a);

// Pearson cross-correlation between dimensions of zs and za across the
// batch, after per-dimension Z-score normalization (population std,
// eps = 1e-8 in the denominator). zs, za: [B,N], B >= 2; result [N,N].
ad::VarId correlation_matrix(ad::Tape& t, ad::VarId zs, ad::VarId za);

// 0.5 * ||M - I||_F^2
ad::VarId loss_fac(ad::Tape& t, ad::VarId corr);

// mean over batch of |y - yhat| summed over the 2 gaze components
ad::VarId l1_mean(ad::Tape& t, ad::VarId y_const, ad::VarId yhat);

// 0.5 * L1(y_s, yhat_s) + 0.5 * L1(y_s, yhat_a); both terms against y_s
// because the intervention preserves the label.
ad::VarId loss_gaze(ad::Tape& t, ad::VarId y_s, ad::VarId yhat_s, ad::VarId yhat_a);

// lambda_con * l_con + lambda_fac * l_fac + lambda_gaze * l_gaze
ad::VarId loss_prim(ad::Tape& t, ad::VarId l_con, ad::VarId l_fac, ad::VarId l_gaze,
                    const LossWeights& w);

}  // namespace cauge::losses
