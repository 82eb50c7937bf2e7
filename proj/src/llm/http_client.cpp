#include "mvf/llm/http_client.hpp"

#include <cstdlib>

#include <httplib.h>
#include <json.hpp>

namespace mvf {
namespace {

std::string env_or(const char* var, const std::string& fallback) {
  const char* value = std::getenv(var);
  return value ? std::string(value) : fallback;
}

}  // namespace

HttpLlmClient::HttpLlmClient(HttpLlmConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) config_.base_url = env_or("LLM_BASE_URL", "");
  if (config_.api_key.empty()) config_.api_key = env_or("LLM_API_KEY", "");
  if (config_.base_url.empty()) {
    throw config_error("HttpLlmClient: base_url not set and LLM_BASE_URL is empty");
  }
}

std::string HttpLlmClient::complete(const LlmRequest& request) {
  request.validate();

  const nlohmann::json body = {
      {"model", request.model_tag},
      {"messages", {{{"role", "user"}, {"content", request.prompt}}}},
      {"max_tokens", request.max_tokens},
      {"temperature", request.temperature}};

  httplib::Client http(config_.base_url);
  http.set_connection_timeout(0, config_.connect_timeout_ms * 1000);
  http.set_read_timeout(config_.read_timeout_ms / 1000,
                        (config_.read_timeout_ms % 1000) * 1000);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  const auto res =
      http.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) {
    throw llm_error(LlmErrorKind::transport,
                    "no response from " + config_.base_url + ": " +
                        httplib::to_string(res.error()));
  }
  if (res->status == 429) {
    throw llm_error(LlmErrorKind::rate_limit, "HTTP 429 from " + config_.base_url);
  }
  if (res->status >= 500) {
    throw llm_error(LlmErrorKind::transport,
                    "HTTP " + std::to_string(res->status) + " from " + config_.base_url);
  }
  if (res->status != 200) {
    throw llm_error(LlmErrorKind::rejected,
                    "HTTP " + std::to_string(res->status) + " from " + config_.base_url +
                        ": " + res->body.substr(0, 200));
  }

  const auto parsed = nlohmann::json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) {
    throw llm_error(LlmErrorKind::malformed, "response body is not JSON");
  }
  if (!parsed.contains("choices") || !parsed["choices"].is_array() ||
      parsed["choices"].empty()) {
    throw llm_error(LlmErrorKind::malformed, "response has no choices");
  }
  const auto& message = parsed["choices"][0];
  if (!message.contains("message") || !message["message"].contains("content") ||
      !message["message"]["content"].is_string()) {
    throw llm_error(LlmErrorKind::malformed, "choice has no message.content");
  }
  return message["message"]["content"].get<std::string>();
}

}  // namespace mvf
