#include "cauge/tape.hpp"

#include <cmath>

#include "cauge/kernels.hpp"

namespace cauge::ad {

namespace {

namespace kn = cauge::kernels;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

void check_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected rank-2, got " + t.shape_str());
}

// im2col for one CHW sample; cols is (C*kh*kw) x (OH*OW)
void im2col(const double* x, int C, int H, int W, int kh, int kw, int stride, int pad,
            int OH, int OW, double* cols) {
  const int P = OH * OW;
  for (int c = 0; c < C; ++c) {
    const double* xc = x + static_cast<int64_t>(c) * H * W;
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        double* row = cols + static_cast<int64_t>((c * kh + i) * kw + j) * P;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride + i - pad;
          double* dst = row + static_cast<int64_t>(oy) * OW;
          if (iy < 0 || iy >= H) {
            for (int ox = 0; ox < OW; ++ox) dst[ox] = 0.0;
            continue;
          }
          const double* src = xc + static_cast<int64_t>(iy) * W;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride + j - pad;
            dst[ox] = (ix >= 0 && ix < W) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* cols, int C, int H, int W, int kh, int kw, int stride,
                int pad, int OH, int OW, double* gx) {
  const int P = OH * OW;
  for (int c = 0; c < C; ++c) {
    double* gc = gx + static_cast<int64_t>(c) * H * W;
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const double* row = cols + static_cast<int64_t>((c * kh + i) * kw + j) * P;
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride + i - pad;
          if (iy < 0 || iy >= H) continue;
          const double* src = row + static_cast<int64_t>(oy) * OW;
          double* dst = gc + static_cast<int64_t>(iy) * W;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride + j - pad;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

VarId Tape::push(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && recording_;
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

void Tape::set_bwd(VarId id, std::function<void(Tape&)> fn) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.requires_grad) n.backward = std::move(fn);
}

VarId Tape::leaf(const Tensor& value, bool requires_grad) {
  Node n;
  n.value = value;
  n.requires_grad = requires_grad && recording_;
  nodes_.push_back(std::move(n));
  return static_cast<VarId>(nodes_.size() - 1);
}

Tensor& Tape::grad(VarId id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.numel() == 0) n.grad = Tensor(n.value.shape());
  return n.grad;
}

double Tape::scalar(VarId id) const {
  const Tensor& v = value(id);
  if (v.numel() != 1) throw DimensionError("scalar(): node is not a scalar " + v.shape_str());
  return v[0];
}

void Tape::backward(VarId loss) {
  if (value(loss).numel() != 1)
    throw DimensionError("backward(): loss must be scalar, got " + value(loss).shape_str());
  grad(loss)[0] = 1.0;
  for (VarId id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.backward && n.grad.numel() != 0) n.backward(*this);
  }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

VarId Tape::add(VarId a, VarId b) {
  check_same_shape(value(a), value(b), "add");
  Tensor y(value(a).shape());
  kn::active().add(value(a).data(), value(b).data(), y.data(), y.numel());
  VarId out = push(std::move(y), track(a) || track(b));
  set_bwd(out, [a, b, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    if (t.track(a)) kn::active().axpy(1.0, gy.data(), t.grad(a).data(), gy.numel());
    if (t.track(b)) kn::active().axpy(1.0, gy.data(), t.grad(b).data(), gy.numel());
  });
  return out;
}

VarId Tape::sub(VarId a, VarId b) {
  check_same_shape(value(a), value(b), "sub");
  Tensor y(value(a).shape());
  kn::active().sub(value(a).data(), value(b).data(), y.data(), y.numel());
  VarId out = push(std::move(y), track(a) || track(b));
  set_bwd(out, [a, b, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    if (t.track(a)) kn::active().axpy(1.0, gy.data(), t.grad(a).data(), gy.numel());
    if (t.track(b)) kn::active().axpy(-1.0, gy.data(), t.grad(b).data(), gy.numel());
  });
  return out;
}

VarId Tape::mul(VarId a, VarId b) {
  check_same_shape(value(a), value(b), "mul");
  Tensor y(value(a).shape());
  kn::active().mul(value(a).data(), value(b).data(), y.data(), y.numel());
  VarId out = push(std::move(y), track(a) || track(b));
  set_bwd(out, [a, b, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    const int64_t n = gy.numel();
    if (t.track(a)) {
      const double* vb = t.value(b).data();
      double* ga = t.grad(a).data();
      const double* g = gy.data();
      for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * vb[i];
    }
    if (t.track(b)) {
      const double* va = t.value(a).data();
      double* gb = t.grad(b).data();
      const double* g = gy.data();
      for (int64_t i = 0; i < n; ++i) gb[i] += g[i] * va[i];
    }
  });
  return out;
}

VarId Tape::div(VarId a, VarId b) {
  check_same_shape(value(a), value(b), "div");
  Tensor y(value(a).shape());
  const int64_t n = y.numel();
  for (int64_t i = 0; i < n; ++i) y[i] = value(a)[i] / value(b)[i];
  VarId out = push(std::move(y), track(a) || track(b));
  set_bwd(out, [a, b, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    const Tensor& yv = t.value(out);
    const double* vb = t.value(b).data();
    const int64_t n2 = gy.numel();
    if (t.track(a)) {
      double* ga = t.grad(a).data();
      for (int64_t i = 0; i < n2; ++i) ga[i] += gy[i] / vb[i];
    }
    if (t.track(b)) {
      double* gb = t.grad(b).data();
      for (int64_t i = 0; i < n2; ++i) gb[i] -= gy[i] * yv[i] / vb[i];
    }
  });
  return out;
}

VarId Tape::scale(VarId x, double c) {
  Tensor y(value(x).shape());
  kn::active().scale(c, value(x).data(), y.data(), y.numel());
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out, c](Tape& t) {
    const Tensor& gy = t.grad(out);
    kn::active().axpy(c, gy.data(), t.grad(x).data(), gy.numel());
  });
  return out;
}

VarId Tape::add_scalar(VarId x, double c) {
  Tensor y(value(x).shape());
  const int64_t n = y.numel();
  for (int64_t i = 0; i < n; ++i) y[i] = value(x)[i] + c;
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    kn::active().axpy(1.0, gy.data(), t.grad(x).data(), gy.numel());
  });
  return out;
}

VarId Tape::relu(VarId x) {
  Tensor y(value(x).shape());
  kn::active().relu_fwd(value(x).data(), y.data(), y.numel());
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    kn::active().relu_bwd(t.value(x).data(), gy.data(), t.grad(x).data(), gy.numel());
  });
  return out;
}

VarId Tape::sigmoid(VarId x) {
  Tensor y(value(x).shape());
  kn::sigmoid(value(x).data(), y.data(), y.numel());
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    const Tensor& yv = t.value(out);
    double* gx = t.grad(x).data();
    for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
  });
  return out;
}

VarId Tape::softplus(VarId x) {
  Tensor y(value(x).shape());
  kn::softplus(value(x).data(), y.data(), y.numel());
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    const Tensor& xv = t.value(x);
    Tensor sig(xv.shape());
    kn::sigmoid(xv.data(), sig.data(), sig.numel());
    double* gx = t.grad(x).data();
    for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += gy[i] * sig[i];
  });
  return out;
}

VarId Tape::abs(VarId x) {
  Tensor y(value(x).shape());
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::abs(value(x)[i]);
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    const Tensor& xv = t.value(x);
    double* gx = t.grad(x).data();
    for (int64_t i = 0; i < gy.numel(); ++i) {
      const double s = xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0);
      gx[i] += gy[i] * s;
    }
  });
  return out;
}

VarId Tape::square(VarId x) {
  Tensor y(value(x).shape());
  kn::active().mul(value(x).data(), value(x).data(), y.data(), y.numel());
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    const Tensor& xv = t.value(x);
    double* gx = t.grad(x).data();
    for (int64_t i = 0; i < gy.numel(); ++i) gx[i] += 2.0 * xv[i] * gy[i];
  });
  return out;
}

VarId Tape::sqrt_shift(VarId x, double shift) {
  Tensor y(value(x).shape());
  for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::sqrt(value(x)[i] + shift);
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out](Tape& t) {
    const Tensor& gy = t.grad(out);
    const Tensor& yv = t.value(out);
    double* gx = t.grad(x).data();
    for (int64_t i = 0; i < gy.numel(); ++i)
      if (yv[i] > 0.0) gx[i] += gy[i] / (2.0 * yv[i]);
  });
  return out;
}

// ---------------------------------------------------------------------------
// reductions / 2-D structure
// ---------------------------------------------------------------------------

VarId Tape::sum_all(VarId x) {
  Tensor y = Tensor::scalar(kn::active().sum(value(x).data(), value(x).numel()));
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out](Tape& t) {
    const double g = t.grad(out)[0];
    Tensor& gx = t.grad(x);
    for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
  return out;
}

VarId Tape::mean_all(VarId x) {
  const int64_t n = value(x).numel();
  if (n == 0) throw DimensionError("mean_all: empty tensor");
  Tensor y = Tensor::scalar(kn::active().sum(value(x).data(), n) / static_cast<double>(n));
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out, n](Tape& t) {
    const double g = t.grad(out)[0] / static_cast<double>(n);
    Tensor& gx = t.grad(x);
    for (int64_t i = 0; i < gx.numel(); ++i) gx[i] += g;
  });
  return out;
}

VarId Tape::col_mean(VarId x) {
  check_rank2(value(x), "col_mean");
  const int B = value(x).dim(0), N = value(x).dim(1);
  Tensor y({1, N});
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < N; ++j) y[j] += value(x).at(b, j);
  for (int j = 0; j < N; ++j) y[j] /= B;
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out, B, N](Tape& t) {
    const Tensor& gy = t.grad(out);
    Tensor& gx = t.grad(x);
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < N; ++j) gx.at(b, j) += gy[j] / B;
  });
  return out;
}

VarId Tape::col_sum(VarId x) {
  check_rank2(value(x), "col_sum");
  const int B = value(x).dim(0), N = value(x).dim(1);
  Tensor y({1, N});
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < N; ++j) y[j] += value(x).at(b, j);
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out, B, N](Tape& t) {
    const Tensor& gy = t.grad(out);
    Tensor& gx = t.grad(x);
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < N; ++j) gx.at(b, j) += gy[j];
  });
  return out;
}

VarId Tape::sub_row(VarId x, VarId r) {
  check_rank2(value(x), "sub_row");
  const int B = value(x).dim(0), N = value(x).dim(1);
  if (value(r).rank() != 2 || value(r).dim(0) != 1 || value(r).dim(1) != N)
    throw DimensionError("sub_row: row shape mismatch");
  Tensor y({B, N});
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < N; ++j) y.at(b, j) = value(x).at(b, j) - value(r)[j];
  VarId out = push(std::move(y), track(x) || track(r));
  set_bwd(out, [x, r, out, B, N](Tape& t) {
    const Tensor& gy = t.grad(out);
    if (t.track(x)) kn::active().axpy(1.0, gy.data(), t.grad(x).data(), gy.numel());
    if (t.track(r)) {
      Tensor& gr = t.grad(r);
      for (int b = 0; b < B; ++b)
        for (int j = 0; j < N; ++j) gr[j] -= gy.at(b, j);
    }
  });
  return out;
}

VarId Tape::div_row(VarId x, VarId r) {
  check_rank2(value(x), "div_row");
  const int B = value(x).dim(0), N = value(x).dim(1);
  if (value(r).rank() != 2 || value(r).dim(0) != 1 || value(r).dim(1) != N)
    throw DimensionError("div_row: row shape mismatch");
  Tensor y({B, N});
  for (int b = 0; b < B; ++b)
    for (int j = 0; j < N; ++j) y.at(b, j) = value(x).at(b, j) / value(r)[j];
  VarId out = push(std::move(y), track(x) || track(r));
  set_bwd(out, [x, r, out, B, N](Tape& t) {
    const Tensor& gy = t.grad(out);
    const Tensor& rv = t.value(r);
    const Tensor& yv = t.value(out);
    if (t.track(x)) {
      Tensor& gx = t.grad(x);
      for (int b = 0; b < B; ++b)
        for (int j = 0; j < N; ++j) gx.at(b, j) += gy.at(b, j) / rv[j];
    }
    if (t.track(r)) {
      Tensor& gr = t.grad(r);
      for (int b = 0; b < B; ++b)
        for (int j = 0; j < N; ++j) gr[j] -= gy.at(b, j) * yv.at(b, j) / rv[j];
    }
  });
  return out;
}

VarId Tape::matmul_tn(VarId a, VarId b) {
  check_rank2(value(a), "matmul_tn");
  check_rank2(value(b), "matmul_tn");
  const int B = value(a).dim(0), N1 = value(a).dim(1), N2 = value(b).dim(1);
  if (value(b).dim(0) != B) throw DimensionError("matmul_tn: batch mismatch");
  Tensor y({N1, N2});
  kn::active().gemm_tn(N1, N2, B, value(a).data(), value(b).data(), y.data(), false);
  VarId out = push(std::move(y), track(a) || track(b));
  set_bwd(out, [a, b, out, B, N1, N2](Tape& t) {
    const Tensor& gy = t.grad(out);
    if (t.track(a))
      kn::active().gemm_nt(B, N1, N2, t.value(b).data(), gy.data(), t.grad(a).data(), true);
    if (t.track(b))
      kn::active().gemm_nn(B, N2, N1, t.value(a).data(), gy.data(), t.grad(b).data(), true);
  });
  return out;
}

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

VarId Tape::linear(VarId x, VarId w, VarId b) {
  check_rank2(value(x), "linear");
  const int B = value(x).dim(0), N = value(x).dim(1);
  const int M = value(w).dim(0);
  if (value(w).rank() != 2 || value(w).dim(1) != N)
    throw DimensionError("linear: weight shape " + value(w).shape_str() + " does not match input " +
                         value(x).shape_str());
  if (value(b).numel() != M) throw DimensionError("linear: bias size mismatch");
  Tensor y({B, M});
  kn::active().gemm_nt(B, M, N, value(x).data(), value(w).data(), y.data(), false);
  for (int i = 0; i < B; ++i)
    kn::active().add(y.data() + static_cast<int64_t>(i) * M, value(b).data(),
                     y.data() + static_cast<int64_t>(i) * M, M);
  VarId out = push(std::move(y), track(x) || track(w) || track(b));
  set_bwd(out, [x, w, b, out, B, M, N](Tape& t) {
    const Tensor& gy = t.grad(out);
    if (t.track(x))
      kn::active().gemm_nn(B, N, M, gy.data(), t.value(w).data(), t.grad(x).data(), true);
    if (t.track(w))
      kn::active().gemm_tn(M, N, B, gy.data(), t.value(x).data(), t.grad(w).data(), true);
    if (t.track(b)) {
      Tensor& gb = t.grad(b);
      for (int i = 0; i < B; ++i)
        kn::active().add(gb.data(), gy.data() + static_cast<int64_t>(i) * M, gb.data(), M);
    }
  });
  return out;
}

VarId Tape::conv2d(VarId x, VarId w, VarId b, int stride, int pad) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  if (xv.rank() != 4) throw DimensionError("conv2d: input must be [B,C,H,W], got " + xv.shape_str());
  if (wv.rank() != 4) throw DimensionError("conv2d: weight must be [O,C,kh,kw]");
  const int B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int O = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  if (wv.dim(1) != C)
    throw DimensionError("conv2d: channel mismatch, input " + xv.shape_str() + " weight " +
                         wv.shape_str());
  if (value(b).numel() != O) throw DimensionError("conv2d: bias size mismatch");
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;
  if (OH <= 0 || OW <= 0) throw DimensionError("conv2d: output would be empty");
  const int K = C * kh * kw;
  const int P = OH * OW;

  Tensor y({B, O, OH, OW});
  {
    Tensor cols({K, P});
    for (int s = 0; s < B; ++s) {
      im2col(xv.data() + static_cast<int64_t>(s) * C * H * W, C, H, W, kh, kw, stride, pad,
             OH, OW, cols.data());
      double* ys = y.data() + static_cast<int64_t>(s) * O * P;
      kn::active().gemm_nn(O, P, K, wv.data(), cols.data(), ys, false);
      for (int o = 0; o < O; ++o) {
        const double bo = value(b)[o];
        double* row = ys + static_cast<int64_t>(o) * P;
        for (int p = 0; p < P; ++p) row[p] += bo;
      }
    }
  }

  VarId out = push(std::move(y), track(x) || track(w) || track(b));
  set_bwd(out, [x, w, b, out, stride, pad, B, C, H, W, O, kh, kw, OH, OW, K,
                            P](Tape& t) {
    const Tensor& gy = t.grad(out);
    const Tensor& xval = t.value(x);
    const Tensor& wval = t.value(w);
    Tensor cols({K, P});
    Tensor gcols({K, P});
    for (int s = 0; s < B; ++s) {
      const double* gys = gy.data() + static_cast<int64_t>(s) * O * P;
      if (t.track(w) || t.track(x))
        im2col(xval.data() + static_cast<int64_t>(s) * C * H * W, C, H, W, kh, kw, stride,
               pad, OH, OW, cols.data());
      if (t.track(w))
        kn::active().gemm_nt(O, K, P, gys, cols.data(), t.grad(w).data(), true);
      if (t.track(b)) {
        Tensor& gb = t.grad(b);
        for (int o = 0; o < O; ++o)
          gb[o] += kn::active().sum(gys + static_cast<int64_t>(o) * P, P);
      }
      if (t.track(x)) {
        kn::active().gemm_tn(K, P, O, wval.data(), gys, gcols.data(), false);
        col2im_add(gcols.data(), C, H, W, kh, kw, stride, pad, OH, OW,
                   t.grad(x).data() + static_cast<int64_t>(s) * C * H * W);
      }
    }
  });
  return out;
}

VarId Tape::group_norm(VarId x, VarId gamma, VarId beta, int groups, double eps) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4) throw DimensionError("group_norm: input must be [B,C,H,W]");
  const int B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  if (groups <= 0 || C % groups != 0)
    throw ConfigError("group_norm: channels " + std::to_string(C) + " not divisible by groups " +
                      std::to_string(groups));
  if (value(gamma).numel() != C || value(beta).numel() != C)
    throw DimensionError("group_norm: gamma/beta size mismatch");
  const int gs = C / groups;          // channels per group
  const int64_t m = static_cast<int64_t>(gs) * H * W;  // elements per group
  const int64_t hw = static_cast<int64_t>(H) * W;

  Tensor y({B, C, H, W});
  Tensor mu({B, groups});
  Tensor rstd({B, groups});
  for (int s = 0; s < B; ++s) {
    for (int g = 0; g < groups; ++g) {
      const double* xg = xv.data() + (static_cast<int64_t>(s) * C + g * gs) * hw;
      const double mean = kn::active().sum(xg, m) / static_cast<double>(m);
      const double ssq = kn::active().dot(xg, xg, m) / static_cast<double>(m);
      const double var = std::max(0.0, ssq - mean * mean);
      const double r = 1.0 / std::sqrt(var + eps);
      mu.at(s, g) = mean;
      rstd.at(s, g) = r;
      double* yg = y.data() + (static_cast<int64_t>(s) * C + g * gs) * hw;
      for (int cc = 0; cc < gs; ++cc) {
        const int c = g * gs + cc;
        const double a = value(gamma)[c] * r;
        const double sh = value(beta)[c] - a * mean;
        const double* xr = xg + static_cast<int64_t>(cc) * hw;
        double* yr = yg + static_cast<int64_t>(cc) * hw;
        for (int64_t i = 0; i < hw; ++i) yr[i] = a * xr[i] + sh;
      }
    }
  }

  VarId out = push(std::move(y), track(x) || track(gamma) || track(beta));
  set_bwd(out, [x, gamma, beta, out, B, C, H, W, groups, gs, m, hw, mu,
                            rstd](Tape& t) {
    const Tensor& gy = t.grad(out);
    const Tensor& xval = t.value(x);
    const Tensor& gval = t.value(gamma);
    std::vector<double> xhat(static_cast<size_t>(m));
    std::vector<double> gxh(static_cast<size_t>(m));
    for (int s = 0; s < B; ++s) {
      for (int g = 0; g < groups; ++g) {
        const int64_t base = (static_cast<int64_t>(s) * C + g * gs) * hw;
        const double mean = mu.at(s, g);
        const double r = rstd.at(s, g);
        const double* xg = xval.data() + base;
        const double* gg = gy.data() + base;
        for (int cc = 0; cc < gs; ++cc) {
          const double gc = gval[g * gs + cc];
          for (int64_t i = 0; i < hw; ++i) {
            const int64_t k = cc * hw + i;
            xhat[static_cast<size_t>(k)] = (xg[k] - mean) * r;
            gxh[static_cast<size_t>(k)] = gg[k] * gc;
          }
        }
        if (t.track(gamma) || t.track(beta)) {
          Tensor* ggam = t.track(gamma) ? &t.grad(gamma) : nullptr;
          Tensor* gbet = t.track(beta) ? &t.grad(beta) : nullptr;
          for (int cc = 0; cc < gs; ++cc) {
            const int c = g * gs + cc;
            double sg = 0.0, sb = 0.0;
            for (int64_t i = 0; i < hw; ++i) {
              const int64_t k = cc * hw + i;
              sg += gg[k] * xhat[static_cast<size_t>(k)];
              sb += gg[k];
            }
            if (ggam) (*ggam)[c] += sg;
            if (gbet) (*gbet)[c] += sb;
          }
        }
        if (t.track(x)) {
          double mh = 0.0, mhx = 0.0;
          for (int64_t k = 0; k < m; ++k) {
            mh += gxh[static_cast<size_t>(k)];
            mhx += gxh[static_cast<size_t>(k)] * xhat[static_cast<size_t>(k)];
          }
          mh /= static_cast<double>(m);
          mhx /= static_cast<double>(m);
          double* gx = t.grad(x).data() + base;
          for (int64_t k = 0; k < m; ++k)
            gx[k] += r * (gxh[static_cast<size_t>(k)] - mh -
                          xhat[static_cast<size_t>(k)] * mhx);
        }
      }
    }
  });
  return out;
}

VarId Tape::global_avg_pool(VarId x) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4) throw DimensionError("global_avg_pool: input must be [B,C,H,W]");
  const int B = xv.dim(0), C = xv.dim(1);
  const int64_t hw = static_cast<int64_t>(xv.dim(2)) * xv.dim(3);
  Tensor y({B, C});
  for (int s = 0; s < B; ++s)
    for (int c = 0; c < C; ++c)
      y.at(s, c) = kn::active().sum(xv.data() + (static_cast<int64_t>(s) * C + c) * hw, hw) /
                   static_cast<double>(hw);
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out, B, C, hw](Tape& t) {
    const Tensor& gy = t.grad(out);
    Tensor& gx = t.grad(x);
    for (int s = 0; s < B; ++s)
      for (int c = 0; c < C; ++c) {
        const double g = gy.at(s, c) / static_cast<double>(hw);
        double* dst = gx.data() + (static_cast<int64_t>(s) * C + c) * hw;
        for (int64_t i = 0; i < hw; ++i) dst[i] += g;
      }
  });
  return out;
}

VarId Tape::normalize_channels(VarId x, const std::array<double, 3>& mean,
                               const std::array<double, 3>& stddev) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4 || xv.dim(1) != 3)
    throw DimensionError("normalize_channels: input must be [B,3,H,W], got " + xv.shape_str());
  const int B = xv.dim(0);
  const int64_t hw = static_cast<int64_t>(xv.dim(2)) * xv.dim(3);
  Tensor y(xv.shape());
  for (int s = 0; s < B; ++s)
    for (int c = 0; c < 3; ++c) {
      const double* src = xv.data() + (static_cast<int64_t>(s) * 3 + c) * hw;
      double* dst = y.data() + (static_cast<int64_t>(s) * 3 + c) * hw;
      const double inv = 1.0 / stddev[static_cast<size_t>(c)];
      const double mu = mean[static_cast<size_t>(c)];
      for (int64_t i = 0; i < hw; ++i) dst[i] = (src[i] - mu) * inv;
    }
  VarId out = push(std::move(y), track(x));
  set_bwd(out, [x, out, B, hw, stddev](Tape& t) {
    const Tensor& gy = t.grad(out);
    Tensor& gx = t.grad(x);
    for (int s = 0; s < B; ++s)
      for (int c = 0; c < 3; ++c) {
        const double inv = 1.0 / stddev[static_cast<size_t>(c)];
        const double* g = gy.data() + (static_cast<int64_t>(s) * 3 + c) * hw;
        double* dst = gx.data() + (static_cast<int64_t>(s) * 3 + c) * hw;
        for (int64_t i = 0; i < hw; ++i) dst[i] += g[i] * inv;
      }
  });
  return out;
}

}  // namespace cauge::ad
