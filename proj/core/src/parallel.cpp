#include "autov/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace autov {

std::size_t default_thread_count() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads == 0) threads = default_thread_count();
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t begin = n * w / threads;
      const std::size_t end = n * (w + 1) / threads;
      workers.emplace_back([&, w, begin, end] {
        for (std::size_t i = begin; i < end; ++i) {
          try {
            fn(i);
          } catch (...) {
            errors[w] = std::current_exception();
            return;
          }
        }
      });
    }
  }
  for (std::size_t w = 0; w < threads; ++w)
    if (errors[w]) std::rethrow_exception(errors[w]);
}

}  // namespace autov
