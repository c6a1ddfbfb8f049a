#pragma once

#include <algorithm>
#include <thread>
#include <vector>

#include "smoothout/tensor.hpp"

namespace smoothout {

/// Runs body(i) for i in [0, n) over contiguous chunks on up to `threads`
/// workers. Callers write results by index so the outcome never depends on
/// the worker count.
template <typename Body>
void parallel_for(Index n, unsigned threads, Body&& body) {
  if (threads <= 1 || n < 2) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }
  const Index workers = std::min<Index>(threads, n);
  const Index chunk = (n + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (Index w = 0; w < workers; ++w) {
    const Index lo = w * chunk;
    const Index hi = std::min(n, lo + chunk);
    pool.emplace_back([lo, hi, &body] {
      for (Index i = lo; i < hi; ++i) body(i);
    });
  }
}

}  // namespace smoothout
