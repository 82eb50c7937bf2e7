#pragma once

#include <chrono>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvf/types.hpp"

namespace mvf {

// One completion call. Temperature defaults to 0 so every pipeline prompt is
// reproducible; generation stages that want diversity override it per request.
struct LlmRequest {
  std::string prompt;
  int max_tokens = 512;
  double temperature = 0.0;
  std::string model_tag = "large";

  void validate() const {
    if (prompt.empty()) throw config_error("LlmRequest: prompt must be nonempty");
    if (max_tokens < 1) throw config_error("LlmRequest: max_tokens must be positive");
    if (!(temperature >= 0.0)) {
      throw config_error("LlmRequest: temperature must be >= 0");
    }
    if (model_tag.empty()) throw config_error("LlmRequest: model_tag must be nonempty");
  }
};

// Failure taxonomy for a single attempt. transport / rate_limit / malformed
// are transient and eligible for retry; rejected is a definitive refusal
// (auth, bad request) that no amount of retrying can fix.
enum class LlmErrorKind { transport, rate_limit, malformed, rejected };

inline const char* llm_error_kind_name(LlmErrorKind kind) {
  switch (kind) {
    case LlmErrorKind::transport: return "transport";
    case LlmErrorKind::rate_limit: return "rate_limit";
    case LlmErrorKind::malformed: return "malformed";
    case LlmErrorKind::rejected: return "rejected";
  }
  return "unknown";
}

class llm_error : public std::runtime_error {
 public:
  llm_error(LlmErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(llm_error_kind_name(kind)) + ": " + message),
        kind_(kind) {}
  LlmErrorKind kind() const { return kind_; }
  bool retryable() const { return kind_ != LlmErrorKind::rejected; }

 private:
  LlmErrorKind kind_;
};

// Interface every completion backend implements. Implementations must be safe
// for concurrent complete() calls.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
  virtual std::string name() const = 0;
};

// One scripted outcome for the mock: either a canned response or a failure.
struct MockOutcome {
  bool ok = true;
  std::string body;
  LlmErrorKind kind = LlmErrorKind::transport;

  static MockOutcome success(std::string response) {
    MockOutcome o;
    o.ok = true;
    o.body = std::move(response);
    return o;
  }
  static MockOutcome failure(LlmErrorKind kind) {
    MockOutcome o;
    o.ok = false;
    o.kind = kind;
    return o;
  }
};

// Deterministic test double. Rules are matched by prompt substring in
// insertion order and their outcome lists are consumed one call at a time
// (the last outcome repeats). Unmatched prompts fall through to a default
// responder keyed by the prompt hash, so equal prompts always yield equal
// responses and distinct prompts almost surely differ.
class MockLlm : public LlmClient {
 public:
  explicit MockLlm(std::string name = "mock");

  void script(const std::string& prompt_substring, std::vector<MockOutcome> outcomes);
  void set_default(std::function<std::string(const LlmRequest&)> responder);

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return name_; }

  int calls() const;
  std::vector<std::string> call_log() const;  // one "<sha16> <outcome>" per call
  std::vector<std::string> prompts() const;   // full prompt text per call

 private:
  struct Rule {
    std::string needle;
    std::vector<MockOutcome> outcomes;
    std::size_t next = 0;
  };
  mutable std::mutex mu_;
  std::string name_;
  std::vector<Rule> rules_;
  std::function<std::string(const LlmRequest&)> default_responder_;
  std::vector<std::string> log_;
  std::vector<std::string> prompts_;
};

// Retry schedule: after failed attempt k (1-based) sleep backoff_base * 2^(k-1).
// The sleeper is injectable so tests can record the schedule instead of waiting.
struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{100};
  std::function<void(std::chrono::milliseconds)> sleeper;

  void validate() const {
    if (max_attempts < 1) throw config_error("RetryPolicy: max_attempts must be >= 1");
    if (backoff_base.count() < 0) {
      throw config_error("RetryPolicy: backoff_base must be non-negative");
    }
  }
};

struct AttemptRecord {
  int attempt = 0;
  LlmErrorKind kind = LlmErrorKind::transport;
  std::string message;
};

// Terminal failure after the retry budget is spent; carries the full log.
class llm_retry_exhausted : public std::runtime_error {
 public:
  llm_retry_exhausted(std::string summary, std::vector<AttemptRecord> attempts)
      : std::runtime_error(std::move(summary)), attempts_(std::move(attempts)) {}
  const std::vector<AttemptRecord>& attempts() const { return attempts_; }

 private:
  std::vector<AttemptRecord> attempts_;
};

// First success wins. Retryable failures are retried up to policy.max_attempts
// total attempts with exponential backoff; a rejected error propagates at once.
std::string complete_with_retry(LlmClient& client, const LlmRequest& request,
                                const RetryPolicy& policy = {});

}  // namespace mvf
