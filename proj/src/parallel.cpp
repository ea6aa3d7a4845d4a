#include "cauge/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace cauge {

namespace {
int g_threads = []() {
  unsigned hc = std::thread::hardware_concurrency();
  return static_cast<int>(std::clamp(hc, 1u, 16u));
}();
}  // namespace

void set_worker_threads(int n) { g_threads = std::max(1, n); }
int worker_threads() { return g_threads; }

void parallel_for(int64_t begin, int64_t end, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& fn) {
  const int64_t total = end - begin;
  if (total <= 0) return;
  if (grain < 1) grain = 1;
  const int64_t nblocks = (total + grain - 1) / grain;
  if (g_threads <= 1 || nblocks <= 1) {
    fn(begin, end);
    return;
  }
  std::atomic<int64_t> next{0};
  auto run = [&]() {
    for (;;) {
      int64_t blk = next.fetch_add(1);
      if (blk >= nblocks) break;
      int64_t lo = begin + blk * grain;
      int64_t hi = std::min(end, lo + grain);
      fn(lo, hi);
    }
  };
  const int nthreads = static_cast<int>(std::min<int64_t>(g_threads, nblocks));
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(nthreads) - 1);
  for (int t = 1; t < nthreads; ++t) workers.emplace_back(run);
  run();
  for (auto& w : workers) w.join();
}

}  // namespace cauge
