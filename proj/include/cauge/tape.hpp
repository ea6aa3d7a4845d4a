#pragma once

#include <array>
#include <functional>
#include <vector>

#include "cauge/tensor.hpp"

namespace cauge::ad {

// Reverse-mode autodiff over Tensor ops. A Tape is a single-use dynamic
// graph: build the forward pass with the op methods, call backward() on a
// scalar node, read gradients off the leaves. Every op's vector-Jacobian
// product is closed-form and covered by the finite-difference suite
// (`cauge gradcheck`).
//
// With recording off the same methods run value-only, which is the
// inference / detached-feature path.

using VarId = int;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  VarId leaf(const Tensor& value, bool requires_grad = true);
  VarId constant(const Tensor& value) { return leaf(value, false); }

  const Tensor& value(VarId id) const { return nodes_[static_cast<size_t>(id)].value; }
  Tensor& grad(VarId id);
  bool has_grad(VarId id) const { return nodes_[static_cast<size_t>(id)].grad.numel() != 0; }
  double scalar(VarId id) const;

  void backward(VarId loss);

  // ---- elementwise ----
  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);
  VarId div(VarId a, VarId b);
  VarId scale(VarId x, double c);
  VarId add_scalar(VarId x, double c);
  VarId relu(VarId x);
  VarId sigmoid(VarId x);
  VarId softplus(VarId x);
  VarId abs(VarId x);
  VarId square(VarId x);
  // sqrt(x + shift); shift keeps the derivative finite at x == 0
  VarId sqrt_shift(VarId x, double shift);

  // ---- reductions / 2-D structure ----
  VarId sum_all(VarId x);
  VarId mean_all(VarId x);
  VarId col_mean(VarId x);             // [B,N] -> [1,N]
  VarId col_sum(VarId x);              // [B,N] -> [1,N]
  VarId sub_row(VarId x, VarId r);     // [B,N] - [1,N]
  VarId div_row(VarId x, VarId r);     // [B,N] / [1,N]
  VarId matmul_tn(VarId a, VarId b);   // [B,N1]^T * [B,N2] -> [N1,N2]

  // ---- network layers ----
  VarId linear(VarId x, VarId w, VarId b);  // x[B,N] * w[M,N]^T + b[M]
  VarId conv2d(VarId x, VarId w, VarId b, int stride, int pad);
  VarId group_norm(VarId x, VarId gamma, VarId beta, int groups, double eps);
  VarId global_avg_pool(VarId x);  // [B,C,H,W] -> [B,C]
  VarId normalize_channels(VarId x, const std::array<double, 3>& mean,
                           const std::array<double, 3>& stddev);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&)> backward;
    bool requires_grad = false;
  };

  VarId push(Tensor value, bool requires_grad);
  void set_bwd(VarId id, std::function<void(Tape&)> fn);

 public:
  bool track(VarId a) const { return nodes_[static_cast<size_t>(a)].requires_grad; }

 private:

  std::vector<Node> nodes_;
  bool recording_ = true;
};

}  // namespace cauge::ad
