#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mvf/llm/cache.hpp"
#include "test_util.hpp"

using namespace mvf;
using mvf::testutil::TempDir;

namespace {

LlmRequest request(const std::string& prompt, const std::string& tag = "large",
                   double temperature = 0.0) {
  LlmRequest r;
  r.prompt = prompt;
  r.model_tag = tag;
  r.temperature = temperature;
  return r;
}

}  // namespace

TEST_CASE("cache stores and returns the exact response bytes") {
  TempDir dir;
  ResponseCache cache(dir.path);
  const auto req = request("describe the lighting");
  CHECK(!cache.lookup(req).has_value());

  const std::string response = "line one\nline two\t\"quoted\" \xe2\x9c\x93";
  cache.store(req, response);
  auto hit = cache.lookup(req);
  REQUIRE(hit.has_value());
  CHECK(*hit == response);
  CHECK(cache.size() == 1);
}

TEST_CASE("cache key covers model tag, prompt, and temperature") {
  const auto base = request("p", "large", 0.0);
  CHECK(ResponseCache::key(base) == ResponseCache::key(request("p", "large", 0.0)));
  CHECK(ResponseCache::key(base) != ResponseCache::key(request("q", "large", 0.0)));
  CHECK(ResponseCache::key(base) != ResponseCache::key(request("p", "small", 0.0)));
  CHECK(ResponseCache::key(base) != ResponseCache::key(request("p", "large", 0.7)));
}

TEST_CASE("cache writes one file per response, named by the key") {
  TempDir dir;
  ResponseCache cache(dir.path);
  const auto req = request("the only prompt");
  cache.store(req, "first");
  cache.store(req, "second");  // same key: overwrite, not a second file

  CHECK(cache.size() == 1);
  const auto path = cache.path_for(req);
  CHECK(path.filename().string() == ResponseCache::key(req) + ".json");
  CHECK(std::filesystem::exists(path));
  CHECK(*cache.lookup(req) == "second");

  cache.store(request("another prompt"), "third");
  CHECK(cache.size() == 2);
}

TEST_CASE("cache survives process restart via a fresh handle on the same directory") {
  TempDir dir;
  const auto req = request("resumable?");
  {
    ResponseCache cache(dir.path);
    cache.store(req, "yes");
  }
  ResponseCache reopened(dir.path);
  auto hit = reopened.lookup(req);
  REQUIRE(hit.has_value());
  CHECK(*hit == "yes");
}

TEST_CASE("corrupt cache files read as misses") {
  TempDir dir;
  ResponseCache cache(dir.path);
  const auto req = request("will be corrupted");
  cache.store(req, "fine");
  {
    std::ofstream out(cache.path_for(req), std::ios::trunc);
    out << "not json at all";
  }
  CHECK(!cache.lookup(req).has_value());
}

TEST_CASE("cached client consults the cache before the wrapped client") {
  TempDir dir;
  ResponseCache cache(dir.path);
  MockLlm mock;
  CachedClient client(mock, cache);
  const auto req = request("stable prompt");

  const std::string first = client.complete(req);
  CHECK(mock.calls() == 1);
  CHECK(client.misses() == 1);

  const std::string second = client.complete(req);
  CHECK(second == first);
  CHECK(mock.calls() == 1);  // never re-sent
  CHECK(client.hits() == 1);

  // A warm re-run through a brand-new client still sends nothing.
  MockLlm cold_mock;
  CachedClient warm(cold_mock, cache);
  CHECK(warm.complete(req) == first);
  CHECK(cold_mock.calls() == 0);
}

TEST_CASE("cached client keeps temperatures apart") {
  TempDir dir;
  ResponseCache cache(dir.path);
  MockLlm mock;
  mock.script("vary", {MockOutcome::success("cold"), MockOutcome::success("warm")});
  CachedClient client(mock, cache);

  CHECK(client.complete(request("vary", "large", 0.0)) == "cold");
  CHECK(client.complete(request("vary", "large", 0.9)) == "warm");
  CHECK(client.complete(request("vary", "large", 0.0)) == "cold");
  CHECK(mock.calls() == 2);
}
