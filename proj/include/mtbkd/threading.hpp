#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace mtbkd {

// Static block partition over [0, n); results must be written to disjoint
// preallocated slots so the outcome is independent of the thread count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace mtbkd
