#pragma once

#include <cstdint>
#include <string>

namespace cauge::kernels {

// Numeric inner loops used by the training stack. Each kernel has a scalar
// reference implementation and, where the loop is arithmetic-bound, an AVX2
// variant. The backend is picked once at startup from CPUID and can be
// overridden via set_backend() or the CAUGE_KERNELS env var
// (scalar|avx2|auto). Elementwise kernels are bit-identical across backends;
// GEMM and reductions may differ by accumulation order within ~1e-12 and are
// equivalence-tested against the scalar reference.
//
// Within one backend every kernel is deterministic: parallel splits are by
// fixed output blocks, so results do not depend on the thread count.

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  // C[M x N] = (acc ? C : 0) + A[M x K] * B[K x N]
  void (*gemm_nn)(int M, int N, int K, const double* A, const double* B, double* C, bool acc);
  // C[M x N] = (acc ? C : 0) + A[M x K] * B[N x K]^T
  void (*gemm_nt)(int M, int N, int K, const double* A, const double* B, double* C, bool acc);
  // C[M x N] = (acc ? C : 0) + A[K x M]^T * B[K x N]
  void (*gemm_tn)(int M, int N, int K, const double* A, const double* B, double* C, bool acc);

  void (*add)(const double* a, const double* b, double* y, int64_t n);
  void (*sub)(const double* a, const double* b, double* y, int64_t n);
  void (*mul)(const double* a, const double* b, double* y, int64_t n);
  void (*axpy)(double a, const double* x, double* y, int64_t n);  // y += a*x
  void (*scale)(double a, const double* x, double* y, int64_t n);  // y = a*x
  void (*clip01)(double* x, int64_t n);

  void (*relu_fwd)(const double* x, double* y, int64_t n);
  // gx += gy where x > 0
  void (*relu_bwd)(const double* x, const double* gy, double* gx, int64_t n);

  double (*sum)(const double* x, int64_t n);
  double (*dot)(const double* a, const double* b, int64_t n);

  // fused Adam update; bc1 = 1 - beta1^t, bc2 = 1 - beta2^t
  void (*adam_step)(double* p, const double* g, double* m, double* v, int64_t n,
                    double lr, double beta1, double beta2, double eps,
                    double bc1, double bc2);
};

const KernelTable& active();
Backend active_backend();
std::string backend_name();
bool backend_available(Backend b);
void set_backend(Backend b);  // throws ConfigError if unavailable
void reset_backend_from_env();

const KernelTable& scalar_table();
#if defined(CAUGE_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

// Scalar-only helpers (cheap loops, never dispatched).
void sigmoid(const double* x, double* y, int64_t n);
void softplus(const double* x, double* y, int64_t n);  // log(1+exp(x)), stable

}  // namespace cauge::kernels
