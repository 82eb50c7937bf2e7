#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

// httplib's system headers leak macros that collide with Eigen; keep it last.
#include "mvf/llm/http_client.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace mvf;
using nlohmann::json;

namespace {

// In-process chat-completion server; the handler is swappable per test.
struct LocalServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;

  explicit LocalServer(httplib::Server::Handler handler) {
    server.Post("/v1/chat/completions", std::move(handler));
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~LocalServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

HttpLlmConfig config_for(const LocalServer& server, const std::string& key = "") {
  HttpLlmConfig cfg;
  cfg.base_url = server.url();
  cfg.api_key = key;
  return cfg;
}

std::string completion_body(const std::string& text) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}
      .dump();
}

LlmRequest request(const std::string& prompt) {
  LlmRequest r;
  r.prompt = prompt;
  r.max_tokens = 64;
  r.temperature = 0.25;
  r.model_tag = "small";
  return r;
}

}  // namespace

TEST_CASE("http client sends the documented chat-completion request") {
  json seen_body;
  std::string seen_auth, seen_content_type;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = json::parse(req.body, nullptr, false);
    seen_auth = req.get_header_value("Authorization");
    seen_content_type = req.get_header_value("Content-Type");
    res.set_content(completion_body("a fine photograph"), "application/json");
  });

  HttpLlmClient client(config_for(server, "test-key-123"));
  CHECK(client.complete(request("judge this image")) == "a fine photograph");

  REQUIRE(!seen_body.is_discarded());
  CHECK(seen_body["model"] == "small");
  CHECK(seen_body["max_tokens"] == 64);
  CHECK(seen_body["temperature"] == doctest::Approx(0.25));
  REQUIRE(seen_body["messages"].size() == 1);
  CHECK(seen_body["messages"][0]["role"] == "user");
  CHECK(seen_body["messages"][0]["content"] == "judge this image");
  CHECK(seen_auth == "Bearer test-key-123");
  CHECK(seen_content_type == "application/json");
}

TEST_CASE("http client omits the auth header when no key is set") {
  bool had_auth = true;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    had_auth = req.has_header("Authorization");
    res.set_content(completion_body("ok"), "application/json");
  });
  HttpLlmClient client(config_for(server));
  client.complete(request("x"));
  CHECK(!had_auth);
}

TEST_CASE("status and body map onto the failure taxonomy") {
  std::atomic<int> mode{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    switch (mode.load()) {
      case 0: res.status = 429; break;
      case 1: res.status = 503; break;
      case 2: res.status = 401; res.set_content("bad key", "text/plain"); break;
      case 3: res.set_content("not json {", "application/json"); break;
      case 4: res.set_content(R"({"choices":[]})", "application/json"); break;
      default:
        res.set_content(R"({"choices":[{"message":{"role":"assistant"}}]})",
                        "application/json");
    }
  });
  HttpLlmClient client(config_for(server));
  auto kind_of = [&](int m) {
    mode = m;
    try {
      client.complete(request("x"));
    } catch (const llm_error& e) {
      return e.kind();
    }
    FAIL("expected llm_error");
    return LlmErrorKind::transport;
  };

  CHECK(kind_of(0) == LlmErrorKind::rate_limit);
  CHECK(kind_of(1) == LlmErrorKind::transport);
  CHECK(kind_of(2) == LlmErrorKind::rejected);
  CHECK(kind_of(3) == LlmErrorKind::malformed);
  CHECK(kind_of(4) == LlmErrorKind::malformed);
  CHECK(kind_of(5) == LlmErrorKind::malformed);
}

TEST_CASE("an unreachable host is a transport error") {
  HttpLlmConfig cfg;
  cfg.base_url = "http://127.0.0.1:9";  // discard port; nothing listens here
  cfg.connect_timeout_ms = 200;
  HttpLlmClient client(cfg);
  try {
    client.complete(request("x"));
    FAIL("expected llm_error");
  } catch (const llm_error& e) {
    CHECK(e.kind() == LlmErrorKind::transport);
  }
}

TEST_CASE("http failures flow through the retry loop") {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    if (hits.fetch_add(1) == 0) {
      res.status = 429;
    } else {
      res.set_content(completion_body("second try"), "application/json");
    }
  });
  HttpLlmClient client(config_for(server));
  RetryPolicy policy;
  policy.max_attempts = 3;
  policy.sleeper = [](std::chrono::milliseconds) {};
  CHECK(complete_with_retry(client, request("x"), policy) == "second try");
  CHECK(hits.load() == 2);
}

TEST_CASE("base url and key fall back to the environment") {
  LocalServer server([](const httplib::Request& req, httplib::Response& res) {
    res.set_content(completion_body(req.get_header_value("Authorization")),
                    "application/json");
  });
  setenv("LLM_BASE_URL", server.url().c_str(), 1);
  setenv("LLM_API_KEY", "env-key", 1);
  HttpLlmClient client;  // all fields from the environment
  CHECK(client.config().base_url == server.url());
  CHECK(client.complete(request("x")) == "Bearer env-key");
  unsetenv("LLM_BASE_URL");
  unsetenv("LLM_API_KEY");

  CHECK_THROWS_AS(HttpLlmClient{}, config_error);  // nothing set anywhere
}
