#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace groupmix {

/// Runs fn(i) for i in [0, n). With workers <= 1 this is a plain loop;
/// otherwise contiguous index blocks go to separate threads. Callers write
/// per-index slots and reduce them in index order afterwards, so results
/// do not depend on the worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  const std::size_t num_threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  std::vector<std::thread> threads;
  threads.reserve(num_threads);
  for (std::size_t t = 0; t < num_threads; ++t) {
    const std::size_t lo = n * t / num_threads;
    const std::size_t hi = n * (t + 1) / num_threads;
    threads.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) {
        fn(i);
      }
    });
  }
  for (std::thread& t : threads) {
    t.join();
  }
}

}  // namespace groupmix
