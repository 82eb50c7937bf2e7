#pragma once

#include <atomic>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "mvf/llm/client.hpp"

namespace mvf {

// Disk cache of completed responses, one JSON file per response named by the
// cache key: sha256 over (model_tag, prompt hash, temperature). A pipeline
// re-run with a warm cache therefore never re-sends a prompt. Writes go
// through a temp file + rename and are serialized by a mutex.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path directory);

  static std::string key(const LlmRequest& request);

  std::filesystem::path path_for(const LlmRequest& request) const;
  std::optional<std::string> lookup(const LlmRequest& request) const;
  void store(const LlmRequest& request, const std::string& response);

  const std::filesystem::path& directory() const { return dir_; }
  int size() const;  // cached entries currently on disk

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
};

// Client decorator that consults the cache before the wrapped client and
// stores every fresh response. Hit/miss counters expose resumability in tests.
class CachedClient : public LlmClient {
 public:
  CachedClient(LlmClient& inner, ResponseCache& cache)
      : inner_(inner), cache_(cache) {}

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return inner_.name(); }

  int hits() const { return hits_.load(); }
  int misses() const { return misses_.load(); }

 private:
  LlmClient& inner_;
  ResponseCache& cache_;
  std::atomic<int> hits_{0};
  std::atomic<int> misses_{0};
};

}  // namespace mvf
