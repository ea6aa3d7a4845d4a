#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace cauge {

// Deterministic RNG used everywhere in the project. We do not use the
// <random> distributions because their output is implementation-defined;
// every draw here is a fixed function of the seed, so datasets, training
// runs and metrics reproduce bit-for-bit across compilers.

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t hash_tag(std::string_view tag) {
  uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// Derives an independent stream seed from a base seed, a tag and indices.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t a = 0,
                            uint64_t b = 0) {
  uint64_t s = base ^ hash_tag(tag);
  splitmix64(s);
  s ^= 0x9e3779b97f4a7c15ull * (a + 1);
  splitmix64(s);
  s ^= 0xd1b54a32d192ed03ull * (b + 1);
  uint64_t t = s;
  return splitmix64(t);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // burn-in decorrelates small consecutive seeds
    next_u64();
    next_u64();
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_index(uint64_t n) { return n ? next_u64() % n : 0; }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(uniform_index(static_cast<uint64_t>(hi - lo + 1)));
  }

  double normal() {
    // Box-Muller, no spare caching so the draw count stays predictable
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Marsaglia-Tsang
  double gamma(double alpha) {
    if (alpha < 1.0) {
      double u = uniform();
      if (u < 1e-300) u = 1e-300;
      return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
    }
    const double d = alpha - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (u < 1e-300) u = 1e-300;
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
    }
  }

  double beta(double a, double b) {
    double x = gamma(a);
    double y = gamma(b);
    return x / (x + y);
  }

  std::vector<double> dirichlet(double alpha, int k) {
    std::vector<double> w(static_cast<size_t>(k));
    double total = 0.0;
    for (auto& wi : w) {
      wi = gamma(alpha);
      total += wi;
    }
    if (total < 1e-300) total = 1e-300;
    for (auto& wi : w) wi /= total;
    return w;
  }

  // deterministic Fisher-Yates
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

}  // namespace cauge
