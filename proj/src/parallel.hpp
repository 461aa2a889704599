#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace compactseg::detail {

// Runs fn(begin, end) over fixed-size blocks of [0, n). Block b goes to worker
// b % threads; blocks never overlap, so per-index outputs do not depend on the
// thread count.
template <typename Fn>
void for_each_block(std::size_t n, unsigned threads, Fn&& fn, std::size_t block = 4096) {
  const std::size_t n_blocks = (n + block - 1) / block;
  threads = static_cast<unsigned>(std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n_blocks, 1)));
  if (threads == 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b * block, std::min(n, (b + 1) * block));
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t b = t; b < n_blocks; b += threads) fn(b * block, std::min(n, (b + 1) * block));
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace compactseg::detail
