#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cauge/nets.hpp"

namespace cauge::gradcheck {

struct Result {
  std::string component;
  double max_rel_err = 0.0;
  int coords_checked = 0;
};

// Central finite differences (h = 1e-5) against the tape gradients, on tiny
// double-precision instances (16x16 images, N = 8 features, batch 4).
// Relative error uses max(|analytic|, |numeric|, 1e-3) in the denominator.
// Covers the four networks and every loss, composed end-to-end.
std::vector<Result> run_all(uint64_t seed);

inline constexpr double kTolerance = 1e-4;

bool all_pass(const std::vector<Result>& results, double tol = kTolerance);

}  // namespace cauge::gradcheck
