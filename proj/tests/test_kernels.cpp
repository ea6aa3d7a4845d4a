#include <doctest.h>

#include <cmath>
#include <vector>

#include "cauge/kernels.hpp"
#include "cauge/parallel.hpp"
#include "cauge/rng.hpp"
#include "cauge/tensor.hpp"

using namespace cauge;
namespace kn = cauge::kernels;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("scalar gemm_nn matches a hand-computed 2x2") {
  // A = [[1,2],[3,4]], B = [[5,6],[7,8]] -> C = [[19,22],[43,50]]
  const double A[4] = {1, 2, 3, 4};
  const double B[4] = {5, 6, 7, 8};
  double C[4] = {0, 0, 0, 0};
  kn::scalar_table().gemm_nn(2, 2, 2, A, B, C, false);
  CHECK(C[0] == doctest::Approx(19));
  CHECK(C[1] == doctest::Approx(22));
  CHECK(C[2] == doctest::Approx(43));
  CHECK(C[3] == doctest::Approx(50));
}

TEST_CASE("gemm_nt and gemm_tn agree with gemm_nn on transposed operands") {
  Rng rng(42);
  const int M = 7, N = 5, K = 9;
  const auto A = random_vec(static_cast<size_t>(M) * K, rng);
  const auto B = random_vec(static_cast<size_t>(K) * N, rng);

  std::vector<double> C_nn(static_cast<size_t>(M) * N);
  kn::scalar_table().gemm_nn(M, N, K, A.data(), B.data(), C_nn.data(), false);

  // Bt[N x K] = B^T, so A * Bt^T == A * B
  std::vector<double> Bt(static_cast<size_t>(N) * K);
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < N; ++j) Bt[static_cast<size_t>(j) * K + k] = B[static_cast<size_t>(k) * N + j];
  std::vector<double> C_nt(static_cast<size_t>(M) * N);
  kn::scalar_table().gemm_nt(M, N, K, A.data(), Bt.data(), C_nt.data(), false);
  CHECK(max_abs_diff(C_nn, C_nt) < 1e-12);

  // At[K x M] = A^T, so At^T * B == A * B
  std::vector<double> At(static_cast<size_t>(K) * M);
  for (int i = 0; i < M; ++i)
    for (int k = 0; k < K; ++k) At[static_cast<size_t>(k) * M + i] = A[static_cast<size_t>(i) * K + k];
  std::vector<double> C_tn(static_cast<size_t>(M) * N);
  kn::scalar_table().gemm_tn(M, N, K, At.data(), B.data(), C_tn.data(), false);
  CHECK(max_abs_diff(C_nn, C_tn) < 1e-12);
}

#if defined(CAUGE_HAVE_AVX2)
TEST_CASE("avx2 kernels match the scalar reference") {
  if (!kn::backend_available(kn::Backend::Avx2)) {
    MESSAGE("AVX2 not available on this machine; skipping equivalence checks");
    return;
  }
  const auto& s = kn::scalar_table();
  const auto& v = kn::avx2_table();
  Rng rng(1234);

  SUBCASE("gemm variants, awkward shapes included") {
    for (const auto [M, N, K] : {std::array<int, 3>{1, 1, 1}, {3, 5, 7}, {8, 8, 8},
                                 {17, 13, 29}, {64, 33, 127}, {5, 129, 31}}) {
      const auto A = random_vec(static_cast<size_t>(M) * K, rng);
      const auto B = random_vec(static_cast<size_t>(K) * N, rng);
      const auto At = random_vec(static_cast<size_t>(K) * M, rng);
      const auto Bt = random_vec(static_cast<size_t>(N) * K, rng);
      std::vector<double> c0(static_cast<size_t>(M) * N), c1(c0);

      s.gemm_nn(M, N, K, A.data(), B.data(), c0.data(), false);
      v.gemm_nn(M, N, K, A.data(), B.data(), c1.data(), false);
      CHECK(max_abs_diff(c0, c1) < 1e-11);

      s.gemm_nt(M, N, K, A.data(), Bt.data(), c0.data(), false);
      v.gemm_nt(M, N, K, A.data(), Bt.data(), c1.data(), false);
      CHECK(max_abs_diff(c0, c1) < 1e-11);

      s.gemm_tn(M, N, K, At.data(), B.data(), c0.data(), false);
      v.gemm_tn(M, N, K, At.data(), B.data(), c1.data(), false);
      CHECK(max_abs_diff(c0, c1) < 1e-11);

      // accumulate paths
      s.gemm_nn(M, N, K, A.data(), B.data(), c0.data(), true);
      v.gemm_nn(M, N, K, A.data(), B.data(), c1.data(), true);
      CHECK(max_abs_diff(c0, c1) < 1e-11);
    }
  }

  SUBCASE("elementwise ops are bit-identical") {
    for (const int64_t n : {1, 3, 4, 15, 64, 1001}) {
      const auto a = random_vec(static_cast<size_t>(n), rng);
      const auto b = random_vec(static_cast<size_t>(n), rng);
      std::vector<double> y0(static_cast<size_t>(n)), y1(y0);

      s.add(a.data(), b.data(), y0.data(), n);
      v.add(a.data(), b.data(), y1.data(), n);
      CHECK(y0 == y1);
      s.sub(a.data(), b.data(), y0.data(), n);
      v.sub(a.data(), b.data(), y1.data(), n);
      CHECK(y0 == y1);
      s.mul(a.data(), b.data(), y0.data(), n);
      v.mul(a.data(), b.data(), y1.data(), n);
      CHECK(y0 == y1);
      s.scale(1.7, a.data(), y0.data(), n);
      v.scale(1.7, a.data(), y1.data(), n);
      CHECK(y0 == y1);
      s.relu_fwd(a.data(), y0.data(), n);
      v.relu_fwd(a.data(), y1.data(), n);
      CHECK(y0 == y1);

      auto y0c = a, y1c = a;
      s.clip01(y0c.data(), n);
      v.clip01(y1c.data(), n);
      CHECK(y0c == y1c);

      auto acc0 = b, acc1 = b;
      s.axpy(-0.37, a.data(), acc0.data(), n);
      v.axpy(-0.37, a.data(), acc1.data(), n);
      CHECK(acc0 == acc1);

      auto gx0 = b, gx1 = b;
      s.relu_bwd(a.data(), b.data(), gx0.data(), n);
      v.relu_bwd(a.data(), b.data(), gx1.data(), n);
      CHECK(gx0 == gx1);
    }
  }

  SUBCASE("reductions agree within accumulation-order tolerance") {
    for (const int64_t n : {1, 5, 100, 4097}) {
      const auto a = random_vec(static_cast<size_t>(n), rng);
      const auto b = random_vec(static_cast<size_t>(n), rng);
      CHECK(std::abs(s.sum(a.data(), n) - v.sum(a.data(), n)) < 1e-10);
      CHECK(std::abs(s.dot(a.data(), b.data(), n) - v.dot(a.data(), b.data(), n)) < 1e-10);
    }
  }

  SUBCASE("adam_step is bit-identical") {
    const int64_t n = 131;
    auto p0 = random_vec(static_cast<size_t>(n), rng), p1 = p0;
    auto g = random_vec(static_cast<size_t>(n), rng);
    auto m0 = random_vec(static_cast<size_t>(n), rng, 0.1), m1 = m0;
    auto v0 = random_vec(static_cast<size_t>(n), rng, 0.01), v1 = v0;
    for (auto& x : v0) x = std::abs(x);
    v1 = v0;
    s.adam_step(p0.data(), g.data(), m0.data(), v0.data(), n, 1e-3, 0.9, 0.95, 1e-8, 0.1, 0.05);
    v.adam_step(p1.data(), g.data(), m1.data(), v1.data(), n, 1e-3, 0.9, 0.95, 1e-8, 0.1, 0.05);
    CHECK(p0 == p1);
    CHECK(m0 == m1);
    CHECK(v0 == v1);
  }
}
#endif  // CAUGE_HAVE_AVX2

TEST_CASE("parallel_for covers every index exactly once, any thread count") {
  for (const int threads : {1, 3, 8}) {
    set_worker_threads(threads);
    std::vector<int> hits(1000, 0);
    parallel_for(0, 1000, 7, [&](int64_t lo, int64_t hi) {
      for (int64_t i = lo; i < hi; ++i) hits[static_cast<size_t>(i)]++;
    });
    for (int h : hits) CHECK(h == 1);
  }
  set_worker_threads(1);
}

TEST_CASE("gemm results do not depend on the thread count") {
  Rng rng(7);
  const int M = 67, N = 41, K = 53;
  const auto A = random_vec(static_cast<size_t>(M) * K, rng);
  const auto B = random_vec(static_cast<size_t>(K) * N, rng);
  std::vector<double> c1(static_cast<size_t>(M) * N), c4(c1);
  set_worker_threads(1);
  kn::active().gemm_nn(M, N, K, A.data(), B.data(), c1.data(), false);
  set_worker_threads(4);
  kn::active().gemm_nn(M, N, K, A.data(), B.data(), c4.data(), false);
  set_worker_threads(1);
  CHECK(c1 == c4);  // bitwise: the block split is thread-count independent
}

TEST_CASE("sigmoid and softplus are stable at large magnitudes") {
  const double xs[] = {-745.0, -60.0, -1.0, 0.0, 1.0, 60.0, 745.0};
  double sig[7], sp[7];
  kn::sigmoid(xs, sig, 7);
  kn::softplus(xs, sp, 7);
  for (int i = 0; i < 7; ++i) {
    CHECK(std::isfinite(sig[i]));
    CHECK(std::isfinite(sp[i]));
    CHECK(sig[i] >= 0.0);
    CHECK(sig[i] <= 1.0);
    CHECK(sp[i] >= 0.0);
  }
  CHECK(sig[3] == doctest::Approx(0.5));
  CHECK(sp[3] == doctest::Approx(std::log(2.0)));
  CHECK(sp[6] == doctest::Approx(745.0));
}
