#pragma once

#include <cstdint>
#include <functional>

namespace cauge {

// Fixed-block parallel loop. Work is split into blocks whose boundaries
// depend only on (begin, end, grain), never on the thread count, and each
// block writes disjoint outputs, so results are bitwise identical for any
// --jobs value.
void parallel_for(int64_t begin, int64_t end, int64_t grain,
                  const std::function<void(int64_t, int64_t)>& fn);

void set_worker_threads(int n);  // n <= 1 disables the pool
int worker_threads();

}  // namespace cauge
