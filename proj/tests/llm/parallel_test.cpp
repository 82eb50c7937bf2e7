#include <doctest.h>

#include <atomic>
#include <chrono>
#include <stdexcept>
#include <thread>
#include <vector>

#include "mvf/llm/parallel.hpp"

using namespace mvf;

TEST_CASE("parallel_map preserves input order") {
  std::vector<int> items(40);
  for (int i = 0; i < 40; ++i) items[size_t(i)] = i;
  auto results = parallel_map(
      items,
      [](int x) {
        std::this_thread::sleep_for(std::chrono::milliseconds(x % 3));
        return x * x;
      },
      4);
  REQUIRE(results.size() == 40);
  for (int i = 0; i < 40; ++i) CHECK(results[size_t(i)] == i * i);
}

TEST_CASE("at most `parallelism` calls are in flight") {
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
  auto body = [&](int) {
    const int now = in_flight.fetch_add(1) + 1;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(3));
    in_flight.fetch_sub(1);
  };
  parallel_for(24, 3, body);
  CHECK(peak.load() <= 3);
  CHECK(peak.load() >= 2);  // the bound is used, not just never exceeded

  peak = 0;
  parallel_for(8, 1, body);
  CHECK(peak.load() == 1);
}

TEST_CASE("the first failing item's exception is rethrown") {
  std::atomic<int> completed{0};
  try {
    parallel_for(16, 4, [&](int i) {
      if (i == 5) throw std::runtime_error("boom at 5");
      if (i == 11) throw std::runtime_error("boom at 11");
      completed.fetch_add(1);
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "boom at 5");
  }
  CHECK(completed.load() == 14);
}

TEST_CASE("degenerate sizes") {
  std::vector<int> empty;
  CHECK(parallel_map(empty, [](int x) { return x; }, 4).empty());

  std::vector<int> two = {7, 9};
  auto results = parallel_map(two, [](int x) { return x + 1; }, 16);
  CHECK(results == std::vector<int>{8, 10});

  CHECK_THROWS_AS(parallel_for(3, 0, [](int) {}), config_error);
  CHECK_THROWS_AS(parallel_for(-1, 2, [](int) {}), config_error);
}
