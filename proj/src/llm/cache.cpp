#include "mvf/llm/cache.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mvf/llm/sha256.hpp"

namespace mvf {
namespace {

std::string canonical_temperature(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", t);
  return buf;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path directory)
    : dir_(std::move(directory)) {
  std::filesystem::create_directories(dir_);
}

std::string ResponseCache::key(const LlmRequest& request) {
  request.validate();
  // The prompt enters only through its hash, so the key material is
  // fixed-shape and arbitrary prompt bytes cannot collide across fields.
  std::string material = "model=" + request.model_tag +
                         "\nprompt_sha256=" + sha256_hex(request.prompt) +
                         "\ntemperature=" + canonical_temperature(request.temperature);
  return sha256_hex(material);
}

std::filesystem::path ResponseCache::path_for(const LlmRequest& request) const {
  return dir_ / (key(request) + ".json");
}

std::optional<std::string> ResponseCache::lookup(const LlmRequest& request) const {
  const auto path = path_for(request);
  std::lock_guard<std::mutex> lock(mu_);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  const auto parsed = nlohmann::json::parse(buf.str(), nullptr, false);
  if (parsed.is_discarded() || !parsed.contains("response") ||
      !parsed["response"].is_string()) {
    return std::nullopt;
  }
  return parsed["response"].get<std::string>();
}

void ResponseCache::store(const LlmRequest& request, const std::string& response) {
  nlohmann::json entry = {{"model_tag", request.model_tag},
                          {"temperature", request.temperature},
                          {"prompt_sha256", sha256_hex(request.prompt)},
                          {"response", response}};
  const auto path = path_for(request);
  const auto tmp = path.string() + ".tmp";
  std::lock_guard<std::mutex> lock(mu_);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("ResponseCache: cannot write " + tmp);
    out << entry.dump(2) << "\n";
  }
  std::filesystem::rename(tmp, path);
}

int ResponseCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir_)) {
    if (e.path().extension() == ".json") ++n;
  }
  return n;
}

std::string CachedClient::complete(const LlmRequest& request) {
  if (auto cached = cache_.lookup(request)) {
    hits_.fetch_add(1);
    return *cached;
  }
  std::string response = inner_.complete(request);
  cache_.store(request, response);
  misses_.fetch_add(1);
  return response;
}

}  // namespace mvf
