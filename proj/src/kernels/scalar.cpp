#include <algorithm>
#include <cmath>

#include "cauge/kernels.hpp"
#include "cauge/parallel.hpp"

// Reference kernels. Plain loops, fixed accumulation order; the SIMD
// variants are tested against these.

namespace cauge::kernels {
namespace {

constexpr int64_t kRowGrain = 32;

void s_gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool acc) {
  parallel_for(0, M, kRowGrain, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      double* ci = C + i * N;
      if (!acc) std::fill(ci, ci + N, 0.0);
      const double* ai = A + i * K;
      for (int k = 0; k < K; ++k) {
        const double a = ai[k];
        const double* bk = B + static_cast<int64_t>(k) * N;
        for (int j = 0; j < N; ++j) ci[j] += a * bk[j];
      }
    }
  });
}

void s_gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool acc) {
  parallel_for(0, M, kRowGrain, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      const double* ai = A + i * K;
      double* ci = C + i * N;
      for (int j = 0; j < N; ++j) {
        const double* bj = B + static_cast<int64_t>(j) * K;
        double s = 0.0;
        for (int k = 0; k < K; ++k) s += ai[k] * bj[k];
        ci[j] = acc ? ci[j] + s : s;
      }
    }
  });
}

void s_gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool acc) {
  parallel_for(0, M, kRowGrain, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      double* ci = C + i * N;
      if (!acc) std::fill(ci, ci + N, 0.0);
      for (int k = 0; k < K; ++k) {
        const double a = A[static_cast<int64_t>(k) * M + i];
        const double* bk = B + static_cast<int64_t>(k) * N;
        for (int j = 0; j < N; ++j) ci[j] += a * bk[j];
      }
    }
  });
}

void s_add(const double* a, const double* b, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}
void s_sub(const double* a, const double* b, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] - b[i];
}
void s_mul(const double* a, const double* b, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}
void s_axpy(double a, const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}
void s_scale(double a, const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = a * x[i];
}
void s_clip01(double* x, int64_t n) {
  for (int64_t i = 0; i < n; ++i) x[i] = std::min(1.0, std::max(0.0, x[i]));
}

void s_relu_fwd(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void s_relu_bwd(const double* x, const double* gy, double* gx, int64_t n) {
  for (int64_t i = 0; i < n; ++i)
    if (x[i] > 0.0) gx[i] += gy[i];
}

double s_sum(const double* x, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += x[i];
  return s;
}
double s_dot(const double* a, const double* b, int64_t n) {
  double s = 0.0;
  for (int64_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void s_adam(double* p, const double* g, double* m, double* v, int64_t n, double lr,
            double beta1, double beta2, double eps, double bc1, double bc2) {
  for (int64_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable t = {
      s_gemm_nn, s_gemm_nt, s_gemm_tn, s_add,      s_sub, s_mul,
      s_axpy,    s_scale,   s_clip01,  s_relu_fwd, s_relu_bwd,
      s_sum,     s_dot,     s_adam,
  };
  return t;
}

void sigmoid(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    const double v = x[i];
    if (v >= 0.0) {
      const double e = std::exp(-v);
      y[i] = 1.0 / (1.0 + e);
    } else {
      const double e = std::exp(v);
      y[i] = e / (1.0 + e);
    }
  }
}

void softplus(const double* x, double* y, int64_t n) {
  for (int64_t i = 0; i < n; ++i) {
    const double v = x[i];
    y[i] = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  }
}

}  // namespace cauge::kernels
