#if defined(CAUGE_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#include "cauge/kernels.hpp"
#include "cauge/parallel.hpp"

// AVX2+FMA variants. Compiled in its own TU with -mavx2 -mfma; only reached
// after the runtime CPUID check in dispatch.cpp.

namespace cauge::kernels {
namespace {

constexpr int64_t kRowGrain = 32;

// GEMM loop order matches the scalar reference (i, k, j); the j loop is
// vectorized 4-wide with FMA, so results differ from scalar only by the
// fused rounding.
void v_gemm_nn(int M, int N, int K, const double* A, const double* B, double* C, bool acc) {
  const int nv = N & ~3;
  parallel_for(0, M, kRowGrain, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      double* ci = C + i * N;
      if (!acc) std::fill(ci, ci + N, 0.0);
      const double* ai = A + i * K;
      for (int k = 0; k < K; ++k) {
        const double a = ai[k];
        const __m256d av = _mm256_set1_pd(a);
        const double* bk = B + static_cast<int64_t>(k) * N;
        int j = 0;
        for (; j < nv; j += 4) {
          __m256d c = _mm256_loadu_pd(ci + j);
          c = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + j), c);
          _mm256_storeu_pd(ci + j, c);
        }
        for (; j < N; ++j) ci[j] += a * bk[j];
      }
    }
  });
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void v_gemm_nt(int M, int N, int K, const double* A, const double* B, double* C, bool acc) {
  const int kv = K & ~3;
  parallel_for(0, M, kRowGrain, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      const double* ai = A + i * K;
      double* ci = C + i * N;
      for (int j = 0; j < N; ++j) {
        const double* bj = B + static_cast<int64_t>(j) * K;
        __m256d accv = _mm256_setzero_pd();
        int k = 0;
        for (; k < kv; k += 4)
          accv = _mm256_fmadd_pd(_mm256_loadu_pd(ai + k), _mm256_loadu_pd(bj + k), accv);
        double s = hsum(accv);
        for (; k < K; ++k) s += ai[k] * bj[k];
        ci[j] = acc ? ci[j] + s : s;
      }
    }
  });
}

void v_gemm_tn(int M, int N, int K, const double* A, const double* B, double* C, bool acc) {
  const int nv = N & ~3;
  parallel_for(0, M, kRowGrain, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      double* ci = C + i * N;
      if (!acc) std::fill(ci, ci + N, 0.0);
      for (int k = 0; k < K; ++k) {
        const double a = A[static_cast<int64_t>(k) * M + i];
        const __m256d av = _mm256_set1_pd(a);
        const double* bk = B + static_cast<int64_t>(k) * N;
        int j = 0;
        for (; j < nv; j += 4) {
          __m256d c = _mm256_loadu_pd(ci + j);
          c = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + j), c);
          _mm256_storeu_pd(ci + j, c);
        }
        for (; j < N; ++j) ci[j] += a * bk[j];
      }
    }
  });
}

void v_add(const double* a, const double* b, double* y, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] + b[i];
}
void v_sub(const double* a, const double* b, double* y, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] - b[i];
}
void v_mul(const double* a, const double* b, double* y, int64_t n) {
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) y[i] = a[i] * b[i];
}
void v_axpy(double a, const double* x, double* y, int64_t n) {
  // mul+add, not FMA, to stay bit-identical with the scalar reference
  const __m256d av = _mm256_set1_pd(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}
void v_scale(double a, const double* x, double* y, int64_t n) {
  const __m256d av = _mm256_set1_pd(a);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = a * x[i];
}
void v_clip01(double* x, int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_min_pd(one, _mm256_max_pd(zero, _mm256_loadu_pd(x + i))));
  for (; i < n; ++i) x[i] = std::min(1.0, std::max(0.0, x[i]));
}

void v_relu_fwd(const double* x, double* y, int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void v_relu_bwd(const double* x, const double* gy, double* gx, int64_t n) {
  const __m256d zero = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    __m256d g = _mm256_and_pd(mask, _mm256_loadu_pd(gy + i));
    _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), g));
  }
  for (; i < n; ++i)
    if (x[i] > 0.0) gx[i] += gy[i];
}

double v_sum(const double* x, int64_t n) {
  __m256d acc = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}
double v_dot(const double* a, const double* b, int64_t n) {
  __m256d acc = _mm256_setzero_pd();
  int64_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void v_adam(double* p, const double* g, double* m, double* v, int64_t n, double lr,
            double beta1, double beta2, double eps, double bc1, double bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
  const __m256d vbc1 = _mm256_set1_pd(bc1);
  const __m256d vbc2 = _mm256_set1_pd(bc2);
  const __m256d vlr = _mm256_set1_pd(lr);
  const __m256d veps = _mm256_set1_pd(eps);
  int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d gi = _mm256_loadu_pd(g + i);
    __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(ob1, gi));
    __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(ob2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    __m256d mhat = _mm256_div_pd(mi, vbc1);
    __m256d vhat = _mm256_div_pd(vi, vbc2);
    __m256d upd = _mm256_div_pd(_mm256_mul_pd(vlr, mhat),
                                _mm256_add_pd(_mm256_sqrt_pd(vhat), veps));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * (g[i] * g[i]);
    p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable t = {
      v_gemm_nn, v_gemm_nt, v_gemm_tn, v_add,      v_sub, v_mul,
      v_axpy,    v_scale,   v_clip01,  v_relu_fwd, v_relu_bwd,
      v_sum,     v_dot,     v_adam,
  };
  return t;
}

}  // namespace cauge::kernels

#endif  // CAUGE_HAVE_AVX2
