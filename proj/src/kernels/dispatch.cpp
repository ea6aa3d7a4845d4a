#include <cstdlib>
#include <string>

#include "cauge/common.hpp"
#include "cauge/kernels.hpp"

namespace cauge::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(CAUGE_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend pick_default() {
  if (const char* env = std::getenv("CAUGE_KERNELS")) {
    const std::string s(env);
    if (s == "scalar") return Backend::Scalar;
    if (s == "avx2") {
      if (!backend_available(Backend::Avx2))
        throw ConfigError("CAUGE_KERNELS=avx2 but AVX2 is unavailable on this machine");
      return Backend::Avx2;
    }
    if (!s.empty() && s != "auto")
      throw ConfigError("CAUGE_KERNELS: unknown backend '" + s + "' (scalar|avx2|auto)");
  }
  return backend_available(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

Backend g_backend = pick_default();

}  // namespace

bool backend_available(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
      return cpu_has_avx2();
  }
  return false;
}

void set_backend(Backend b) {
  if (!backend_available(b)) throw ConfigError("kernel backend unavailable on this machine");
  g_backend = b;
}

void reset_backend_from_env() { g_backend = pick_default(); }

Backend active_backend() { return g_backend; }

std::string backend_name() {
  switch (g_backend) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
  }
  return "?";
}

const KernelTable& active() {
#if defined(CAUGE_HAVE_AVX2)
  if (g_backend == Backend::Avx2) return avx2_table();
#endif
  return scalar_table();
}

}  // namespace cauge::kernels
