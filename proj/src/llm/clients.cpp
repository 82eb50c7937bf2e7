#include "mvf/llm/client.hpp"

#include <thread>

#include "mvf/llm/sha256.hpp"

namespace mvf {

MockLlm::MockLlm(std::string name) : name_(std::move(name)) {
  default_responder_ = [](const LlmRequest& request) {
    return "mock[" + request.model_tag + ":" +
           sha256_hex(request.prompt).substr(0, 16) + "]";
  };
}

void MockLlm::script(const std::string& prompt_substring,
                     std::vector<MockOutcome> outcomes) {
  if (outcomes.empty()) throw config_error("MockLlm: script needs >= 1 outcome");
  std::lock_guard<std::mutex> lock(mu_);
  rules_.push_back(Rule{prompt_substring, std::move(outcomes), 0});
}

void MockLlm::set_default(std::function<std::string(const LlmRequest&)> responder) {
  std::lock_guard<std::mutex> lock(mu_);
  default_responder_ = std::move(responder);
}

std::string MockLlm::complete(const LlmRequest& request) {
  request.validate();
  const std::string tag = sha256_hex(request.prompt).substr(0, 16);
  std::lock_guard<std::mutex> lock(mu_);
  prompts_.push_back(request.prompt);
  for (auto& rule : rules_) {
    if (request.prompt.find(rule.needle) == std::string::npos) continue;
    const auto& outcome =
        rule.outcomes[rule.next < rule.outcomes.size() ? rule.next
                                                       : rule.outcomes.size() - 1];
    ++rule.next;
    if (outcome.ok) {
      log_.push_back(tag + " ok");
      return outcome.body;
    }
    log_.push_back(tag + " " + llm_error_kind_name(outcome.kind));
    throw llm_error(outcome.kind, "scripted failure for '" + rule.needle + "'");
  }
  log_.push_back(tag + " ok");
  return default_responder_(request);
}

int MockLlm::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<int>(log_.size());
}

std::vector<std::string> MockLlm::call_log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

std::vector<std::string> MockLlm::prompts() const {
  std::lock_guard<std::mutex> lock(mu_);
  return prompts_;
}

std::string complete_with_retry(LlmClient& client, const LlmRequest& request,
                                const RetryPolicy& policy) {
  policy.validate();
  request.validate();
  const auto sleep_for = policy.sleeper
                             ? policy.sleeper
                             : [](std::chrono::milliseconds d) {
                                 if (d.count() > 0) std::this_thread::sleep_for(d);
                               };
  std::vector<AttemptRecord> attempts;
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    try {
      return client.complete(request);
    } catch (const llm_error& e) {
      attempts.push_back(AttemptRecord{attempt, e.kind(), e.what()});
      if (!e.retryable()) {
        throw;
      }
      if (attempt < policy.max_attempts) {
        sleep_for(policy.backoff_base * (std::int64_t(1) << (attempt - 1)));
      }
    }
  }
  std::string summary = "llm retry budget exhausted after " +
                        std::to_string(policy.max_attempts) + " attempt(s) on " +
                        client.name();
  for (const auto& a : attempts) {
    summary += "\n  attempt " + std::to_string(a.attempt) + " [" +
               llm_error_kind_name(a.kind) + "] " + a.message;
  }
  throw llm_retry_exhausted(summary, std::move(attempts));
}

}  // namespace mvf
