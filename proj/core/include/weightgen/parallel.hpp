#pragma once

#include <cstdint>
#include <functional>

namespace weightgen {

/// Cap the worker pool size for the whole process (CLI --threads).
/// 1 disables the pool entirely.
void set_max_threads(int n);
int max_threads();

/// Run fn(begin, end) over a contiguous partition of [0, n).
/// Chunks only ever write disjoint ranges, so results are identical for any
/// thread count. Nested calls from inside a worker run inline.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

/// Run one task per index in [0, n), pulled from a shared queue. Tasks must
/// be independent; each receives its index.
void parallel_tasks(int64_t n, const std::function<void(int64_t)>& fn);

}  // namespace weightgen
