#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace coverid {

// Runs fn(worker, i) for i in [0, count) on up to `jobs` threads. Work items
// must write disjoint outputs; callers reduce in index order afterwards so the
// result never depends on the schedule.
template <typename Fn>
void parallel_for(int jobs, std::ptrdiff_t count, Fn&& fn) {
  const int workers = static_cast<int>(std::min<std::ptrdiff_t>(std::max(jobs, 1), count));
  if (workers <= 1) {
    for (std::ptrdiff_t i = 0; i < count; ++i) fn(0, i);
    return;
  }
  std::atomic<std::ptrdiff_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&](int worker) {
    try {
      for (std::ptrdiff_t i = next++; i < count; i = next++) fn(worker, i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = count;
    }
  };
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers - 1));
  for (int w = 1; w < workers; ++w) threads.emplace_back(run, w);
  run(0);
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

inline int clamp_jobs(int jobs) { return std::max(jobs, 1); }

}  // namespace coverid
