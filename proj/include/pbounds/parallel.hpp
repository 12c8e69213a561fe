#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace pbounds {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Static block partition over [0, count); results must be written to
// preallocated slots so the reduction order stays deterministic.
template <class Fn>
void parallel_for(long long count, int threads, Fn&& fn) {
  threads = std::min<long long>(resolve_threads(threads), std::max(1LL, count));
  if (count <= 0) return;
  if (threads <= 1) {
    for (long long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      const long long lo = count * w / threads;
      const long long hi = count * (w + 1) / threads;
      try {
        for (long long i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace pbounds
