#pragma once

#include <functional>
#include <vector>

#include "mvf/types.hpp"

namespace mvf {

// Runs body(0..count-1) on a pool of `parallelism` threads. At most
// `parallelism` calls are in flight at any moment; the first exception (by
// item index) is rethrown after all workers finish.
void parallel_for(int count, int parallelism, const std::function<void(int)>& body);

// Order-preserving map: results[i] == fn(items[i]) regardless of scheduling.
template <typename T, typename Fn>
auto parallel_map(const std::vector<T>& items, Fn fn, int parallelism)
    -> std::vector<decltype(fn(items.front()))> {
  std::vector<decltype(fn(items.front()))> results(items.size());
  parallel_for(static_cast<int>(items.size()), parallelism,
               [&](int i) { results[size_t(i)] = fn(items[size_t(i)]); });
  return results;
}

}  // namespace mvf
