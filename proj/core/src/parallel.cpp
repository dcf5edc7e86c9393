#include "weightgen/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace weightgen {

namespace {

std::atomic<int> g_max_threads{0};  // 0 = hardware concurrency
thread_local bool t_in_worker = false;

int effective_threads() {
  int cap = g_max_threads.load(std::memory_order_relaxed);
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw <= 0) hw = 1;
  if (cap <= 0) return hw;
  return std::min(cap, hw);
}

// Minimal fork-join: spawn nthreads-1 helpers per call. Thread creation cost
// is tiny next to the numeric work each call carries.
void run_on_threads(int nthreads, const std::function<void(int)>& body) {
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(nthreads - 1));
  std::exception_ptr first_error;
  std::mutex error_mu;
  auto guarded = [&](int tid) {
    t_in_worker = true;
    try {
      body(tid);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mu);
      if (!first_error) first_error = std::current_exception();
    }
    t_in_worker = false;
  };
  for (int t = 1; t < nthreads; ++t) workers.emplace_back(guarded, t);
  guarded(0);
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

void set_max_threads(int n) { g_max_threads.store(n, std::memory_order_relaxed); }

int max_threads() { return effective_threads(); }

void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
  if (n <= 0) return;
  int nthreads = effective_threads();
  if (t_in_worker || nthreads <= 1 || n < 2) {
    fn(0, n);
    return;
  }
  nthreads = static_cast<int>(std::min<int64_t>(nthreads, n));
  const int64_t chunk = (n + nthreads - 1) / nthreads;
  run_on_threads(nthreads, [&](int tid) {
    const int64_t begin = tid * chunk;
    const int64_t end = std::min<int64_t>(begin + chunk, n);
    if (begin < end) fn(begin, end);
  });
}

void parallel_tasks(int64_t n, const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  int nthreads = effective_threads();
  if (t_in_worker || nthreads <= 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  nthreads = static_cast<int>(std::min<int64_t>(nthreads, n));
  std::atomic<int64_t> next{0};
  run_on_threads(nthreads, [&](int) {
    for (;;) {
      int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) break;
      fn(i);
    }
  });
}

}  // namespace weightgen
