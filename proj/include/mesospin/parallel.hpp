#pragma once

// Coarse-grained parallel map over independent work items (mixture terms,
// parameter grid points). Results land in index order, so any reduction the
// caller performs afterwards is independent of the schedule.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <type_traits>
#include <vector>

namespace mesospin {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{1};
  return n;
}

// Set inside workers: a nested parallel_map runs serially instead of
// multiplying the thread count.
inline thread_local bool in_worker = false;
}  // namespace detail

/// Worker count for parallel_map. 0 selects the hardware concurrency.
inline void set_thread_count(int n) {
  if (n <= 0) n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  detail::thread_setting().store(n);
}

inline int thread_count() { return detail::thread_setting().load(); }

/// Evaluates f(i) for i in [0, count) and returns the results in index order.
template <class F>
auto parallel_map(std::size_t count, F&& f) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
  using R = std::invoke_result_t<F&, std::size_t>;
  std::vector<R> out(count);
  const auto workers =
      detail::in_worker ? std::size_t{1} : std::min<std::size_t>(static_cast<std::size_t>(thread_count()), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        detail::in_worker = true;
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            out[i] = f(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next = count;
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace mesospin
