// Index-parallel loop. Results must be written by index so the outcome does
// not depend on the worker count.
#ifndef RBOXGEO_PARALLEL_HPP
#define RBOXGEO_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rboxgeo {

template <typename F>
void parallel_for(std::size_t n, int workers, F&& body) {
  const std::size_t pool_size =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (pool_size <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(pool_size);
    for (std::size_t t = 0; t < pool_size; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            body(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace rboxgeo

#endif  // RBOXGEO_PARALLEL_HPP
