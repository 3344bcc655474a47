#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace residual {

// Worker cap: RESIDUAL_LAB_THREADS wins, then an explicit request, then the
// hardware. Always at least 1.
inline unsigned resolve_thread_count(unsigned requested = 0) {
  unsigned n = requested;
  if (const char* env = std::getenv("RESIDUAL_LAB_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed > 0) n = static_cast<unsigned>(parsed);
  }
  if (n == 0) n = std::thread::hardware_concurrency();
  return n == 0 ? 1u : n;
}

// Runs fn(block_index) for block_index in [0, n_blocks). Blocks are claimed
// dynamically; the caller must make per-block work independent and do any
// order-sensitive reduction afterwards.
inline void parallel_for_blocks(std::size_t n_blocks, const std::function<void(std::size_t)>& fn,
                                unsigned requested_threads = 0) {
  const unsigned n_threads =
      static_cast<unsigned>(std::min<std::size_t>(resolve_thread_count(requested_threads),
                                                  n_blocks == 0 ? 1 : n_blocks));
  if (n_threads <= 1) {
    for (std::size_t b = 0; b < n_blocks; ++b) fn(b);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= n_blocks) return;
      try {
        fn(b);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n_blocks, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (unsigned t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace residual
