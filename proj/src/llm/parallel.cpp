#include "mvf/llm/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace mvf {

void parallel_for(int count, int parallelism, const std::function<void(int)>& body) {
  if (parallelism < 1) throw config_error("parallel_for: parallelism must be >= 1");
  if (count < 0) throw config_error("parallel_for: count must be non-negative");
  if (count == 0) return;

  std::atomic<int> next{0};
  std::mutex mu;
  int first_failed = count;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (i < first_failed) {
          first_failed = i;
          error = std::current_exception();
        }
      }
    }
  };

  const int threads = parallelism < count ? parallelism : count;
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(size_t(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace mvf
