#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace bigtan {

/// Evaluate f(0..n-1) on a small thread pool; results come back in index order.
/// The first exception by index is rethrown after all workers finish.
template <class F>
auto parallel_map(std::size_t n, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<R> out(n);
  std::vector<std::exception_ptr> err(n);
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t nthreads = std::min(hw, n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = f(i);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  if (nthreads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace bigtan
