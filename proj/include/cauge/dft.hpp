#pragma once

#include <vector>

namespace cauge::fft {

// In-place 2-D DFT on separate re/im planes (row-major h x w). Forward is
// unnormalized; inverse applies the 1/(h*w) factor. Power-of-two lengths go
// through an iterative radix-2 FFT, anything else falls back to the direct
// transform.
void dft2d(std::vector<double>& re, std::vector<double>& im, int h, int w, bool inverse);

bool is_pow2(int n);

}  // namespace cauge::fft
