#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace stable::parallel {

// Replicate-parallel map. Work is split into fixed-size chunks claimed from
// an atomic counter; `body(begin, end)` writes results into caller-owned
// slots indexed by replica, so the aggregate is independent of the thread
// count. Reductions happen afterwards, sequentially, over those slots.
inline void for_replicas(std::size_t total, int threads,
                         const std::function<void(std::size_t, std::size_t)>& body,
                         std::size_t chunk = 256) {
  if (threads <= 1 || total <= chunk) {
    body(0, total);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk);
      if (begin >= total) return;
      const std::size_t end = std::min(begin + chunk, total);
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace stable::parallel
