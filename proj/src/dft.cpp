#include "cauge/dft.hpp"

#include <cmath>

#include "cauge/common.hpp"

namespace cauge::fft {

namespace {

// iterative radix-2 Cooley-Tukey on strided data, n = power of two
void fft1d(double* re, double* im, int n, int stride, bool inverse) {
  // bit-reversal permutation
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[static_cast<long>(i) * stride], re[static_cast<long>(j) * stride]);
      std::swap(im[static_cast<long>(i) * stride], im[static_cast<long>(j) * stride]);
    }
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * M_PI / len;
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (int i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (int k = 0; k < len / 2; ++k) {
        const long a = static_cast<long>(i + k) * stride;
        const long b = static_cast<long>(i + k + len / 2) * stride;
        const double tr = re[b] * cr - im[b] * ci;
        const double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        const double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

void dft1d_naive(double* re, double* im, int n, int stride, bool inverse) {
  std::vector<double> or_(static_cast<size_t>(n)), oi(static_cast<size_t>(n));
  const double sign = inverse ? 1.0 : -1.0;
  for (int k = 0; k < n; ++k) {
    double sr = 0.0, si = 0.0;
    for (int t = 0; t < n; ++t) {
      const double ang = sign * 2.0 * M_PI * k * t / n;
      const double c = std::cos(ang), s = std::sin(ang);
      const double xr = re[static_cast<long>(t) * stride];
      const double xi = im[static_cast<long>(t) * stride];
      sr += xr * c - xi * s;
      si += xr * s + xi * c;
    }
    or_[static_cast<size_t>(k)] = sr;
    oi[static_cast<size_t>(k)] = si;
  }
  for (int k = 0; k < n; ++k) {
    re[static_cast<long>(k) * stride] = or_[static_cast<size_t>(k)];
    im[static_cast<long>(k) * stride] = oi[static_cast<size_t>(k)];
  }
}

void transform1d(double* re, double* im, int n, int stride, bool inverse) {
  if (n == 1) return;
  if (is_pow2(n))
    fft1d(re, im, n, stride, inverse);
  else
    dft1d_naive(re, im, n, stride, inverse);
}

}  // namespace

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void dft2d(std::vector<double>& re, std::vector<double>& im, int h, int w, bool inverse) {
  if (static_cast<long>(h) * w != static_cast<long>(re.size()) || re.size() != im.size())
    throw DimensionError("dft2d: plane size mismatch");
  for (int y = 0; y < h; ++y)
    transform1d(re.data() + static_cast<long>(y) * w, im.data() + static_cast<long>(y) * w, w,
                1, inverse);
  for (int x = 0; x < w; ++x) transform1d(re.data() + x, im.data() + x, h, w, inverse);
  if (inverse) {
    const double scale = 1.0 / (static_cast<double>(h) * w);
    for (auto& v : re) v *= scale;
    for (auto& v : im) v *= scale;
  }
}

}  // namespace cauge::fft
