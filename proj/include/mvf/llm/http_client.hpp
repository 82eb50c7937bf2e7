#pragma once

#include <string>

#include "mvf/llm/client.hpp"

namespace mvf {

// Wire format (chat-completion style, no streaming):
//
//   POST {base_url}{path}
//   Authorization: Bearer {api_key}        (omitted when api_key is empty)
//   Content-Type: application/json
//
//   request body:
//     {
//       "model": "<model_tag>",
//       "messages": [{"role": "user", "content": "<prompt>"}],
//       "max_tokens": <max_tokens>,
//       "temperature": <temperature>
//     }
//
//   200 response body (first choice is the completion):
//     {"choices": [{"message": {"role": "assistant", "content": "<text>"}}]}
//
// Failure mapping: unreachable host / 5xx -> transport; 429 -> rate_limit;
// unparseable body or missing choices[0].message.content -> malformed;
// any other non-200 status -> rejected (not retried).
struct HttpLlmConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8080"; empty -> $LLM_BASE_URL
  std::string api_key;   // empty -> $LLM_API_KEY; may stay empty for local servers
  std::string path = "/v1/chat/completions";
  int connect_timeout_ms = 5000;
  int read_timeout_ms = 120000;
};

class HttpLlmClient : public LlmClient {
 public:
  // Falls back to the environment for unset fields; a resolvable base_url is
  // required. Each complete() uses its own connection, so the client is safe
  // for concurrent use.
  explicit HttpLlmClient(HttpLlmConfig config = {});

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "http:" + config_.base_url; }

  const HttpLlmConfig& config() const { return config_; }

 private:
  HttpLlmConfig config_;
};

}  // namespace mvf
