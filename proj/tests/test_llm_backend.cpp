#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "counsel/llm_backend.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

using namespace counsel;

namespace {

std::vector<ChatMessage> simple_messages() {
  return {{MessageRole::system, "你是法律助手"}, {MessageRole::user, "你好"}};
}

// Local chat-completions stub whose handler is swappable per test.
class StubServer {
 public:
  StubServer() {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request& req, httplib::Response& res) {
                   ++hits_;
                   handler_(req, res);
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  void set_handler(
      std::function<void(const httplib::Request&, httplib::Response&)> h) {
    handler_ = std::move(h);
  }

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1";
  }

  int hits() const { return hits_.load(); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::function<void(const httplib::Request&, httplib::Response&)> handler_ =
      [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices":[{"message":{"content":"pong"}}]})",
                        "application/json");
      };
};

BackendConfig fast_config(const std::string& endpoint) {
  BackendConfig cfg;
  cfg.endpoint = endpoint;
  cfg.model_id = "test-model";
  cfg.timeout_s = 5.0;
  cfg.max_retries = 3;
  cfg.backoff_base_ms = 1.0;  // keep retry tests fast
  cfg.backoff_cap_ms = 2.0;
  cfg.jitter = false;
  return cfg;
}

}  // namespace

TEST_CASE("scripted replies are consumed per role, in order") {
  ScriptedBackend backend(ScriptedScenario::from_role_lists({
      {"draft", {"d1", "d2"}},
      {"manager", {"m1"}},
  }));
  CHECK(backend.complete("draft", simple_messages()) == "d1");
  CHECK(backend.complete("manager", simple_messages()) == "m1");
  CHECK(backend.complete("draft", simple_messages()) == "d2");
}

TEST_CASE("running past a role's script is an error, not a repeat") {
  ScriptedBackend backend(
      ScriptedScenario::from_role_lists({{"draft", {"only"}}}));
  CHECK(backend.complete("draft", simple_messages()) == "only");
  try {
    backend.complete("draft", simple_messages());
    FAIL("expected ScriptExhausted");
  } catch (const ScriptExhausted& e) {
    CHECK(e.agent_role == "draft");
    CHECK(e.call_index == 1);
  }
  // A role with no entries at all fails at index 0.
  try {
    backend.complete("unknown", simple_messages());
    FAIL("expected ScriptExhausted");
  } catch (const ScriptExhausted& e) {
    CHECK(e.call_index == 0);
  }
}

TEST_CASE("the call log records role, index, and request digests") {
  ScriptedBackend backend(ScriptedScenario::from_role_lists(
      {{"draft", {"a", "b"}}, {"manager", {"c"}}}));
  const auto messages = simple_messages();
  backend.complete("draft", messages);
  backend.complete("manager", messages);
  backend.complete("draft", messages);

  const auto log = backend.call_log();
  REQUIRE(log.size() == 3);
  CHECK(log[0].agent_role == "draft");
  CHECK(log[0].call_index == 0);
  CHECK(log[1].agent_role == "manager");
  CHECK(log[2].agent_role == "draft");
  CHECK(log[2].call_index == 1);
  CHECK(log[0].request_digest == digest_messages(messages));
  CHECK(log[0].message_count == 2);
}

TEST_CASE("an empty scenario constructs but exhausts on first use") {
  ScriptedBackend backend(ScriptedScenario{});
  CHECK_THROWS_AS(
      backend.complete("draft", {{MessageRole::user, "问题"}}), ScriptExhausted);
}

TEST_CASE("messages must be non-empty and start with system or user") {
  ScriptedBackend backend(
      ScriptedScenario::from_role_lists({{"draft", {"x"}}}));
  CHECK_THROWS_AS(backend.complete("draft", {}), Error);
  CHECK_THROWS_AS(
      backend.complete("draft", {{MessageRole::assistant, "hi"}}), Error);
}

TEST_CASE("scenario files accept strings and JSON objects") {
  const auto dir = std::filesystem::temp_directory_path() / "counsel_scenario";
  std::filesystem::create_directories(dir);
  const auto path = dir / "s.json";
  std::ofstream(path) << R"({"element": [{"k": 1}], "draft": ["text"]})";
  const ScriptedScenario scenario = load_scenario(path);
  ScriptedBackend backend(scenario);
  const std::string graph_reply = backend.complete("element", simple_messages());
  CHECK(nlohmann::json::parse(graph_reply) == nlohmann::json{{"k", 1}});
  CHECK(backend.complete("draft", simple_messages()) == "text");
  std::filesystem::remove_all(dir);
}

TEST_CASE("scenario format errors are reported") {
  CHECK_THROWS_AS(load_scenario_text("not json"), Error);
  CHECK_THROWS_AS(load_scenario_text("[1,2]"), Error);
  CHECK_THROWS_AS(load_scenario_text(R"({"draft": "not an array"})"), Error);
}

TEST_CASE("scripted backend is safe under concurrent consumption") {
  std::vector<std::string> replies(64, "same");
  ScriptedBackend backend(
      ScriptedScenario::from_role_lists({{"draft", replies}}));
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      for (int n = 0; n < 8; ++n) {
        if (backend.complete("draft", simple_messages()) == "same") ++ok;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(ok.load() == 64);
  CHECK(backend.call_log().size() == 64);
  CHECK_THROWS_AS(backend.complete("draft", simple_messages()),
                  ScriptExhausted);
}

TEST_CASE("http backend round-trips a successful completion") {
  StubServer server;
  nlohmann::json seen_body;
  std::string seen_auth;
  server.set_handler([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = nlohmann::json::parse(req.body);
    seen_auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"content":"您好，可以帮您"}}]})",
                    "application/json");
  });

  setenv("COUNSEL_TEST_KEY", "secret-token", 1);
  BackendConfig cfg = fast_config(server.endpoint());
  cfg.api_key_env = "COUNSEL_TEST_KEY";
  cfg.temperature = 0.3;
  HttpBackend backend(cfg);

  const std::string reply = backend.complete("draft", simple_messages());
  CHECK(reply == "您好，可以帮您");
  CHECK(server.hits() == 1);
  CHECK(seen_auth == "Bearer secret-token");
  CHECK(seen_body.at("model") == "test-model");
  CHECK(seen_body.at("temperature").get<double>() == doctest::Approx(0.3));
  REQUIRE(seen_body.at("messages").size() == 2);
  CHECK(seen_body.at("messages")[0].at("role") == "system");
  CHECK(seen_body.at("messages")[1].at("content") == "你好");
  unsetenv("COUNSEL_TEST_KEY");
}

TEST_CASE("per-call options override configured decoding defaults") {
  StubServer server;
  nlohmann::json seen_body;
  server.set_handler([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = nlohmann::json::parse(req.body);
    res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})",
                    "application/json");
  });
  HttpBackend backend(fast_config(server.endpoint()));
  CallOptions opts;
  opts.temperature = 0.9;
  opts.max_tokens = 42;
  backend.complete("draft", simple_messages(), opts);
  CHECK(seen_body.at("temperature").get<double>() == doctest::Approx(0.9));
  CHECK(seen_body.at("max_tokens") == 42);
}

TEST_CASE("transient server errors are retried until success") {
  StubServer server;
  std::atomic<int> failures{2};
  server.set_handler([&](const httplib::Request&, httplib::Response& res) {
    if (failures.fetch_sub(1) > 0) {
      res.status = 500;
      res.set_content("boom", "text/plain");
    } else {
      res.set_content(R"({"choices":[{"message":{"content":"recovered"}}]})",
                      "application/json");
    }
  });
  HttpBackend backend(fast_config(server.endpoint()));
  CHECK(backend.complete("draft", simple_messages()) == "recovered");
  CHECK(server.hits() == 3);
}

TEST_CASE("429 is transient, 404 is not") {
  StubServer server;
  SUBCASE("429 retried") {
    std::atomic<int> failures{1};
    server.set_handler([&](const httplib::Request&, httplib::Response& res) {
      if (failures.fetch_sub(1) > 0) {
        res.status = 429;
      } else {
        res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})",
                        "application/json");
      }
    });
    HttpBackend backend(fast_config(server.endpoint()));
    CHECK(backend.complete("draft", simple_messages()) == "ok");
    CHECK(server.hits() == 2);
  }
  SUBCASE("404 fails immediately") {
    server.set_handler([](const httplib::Request&, httplib::Response& res) {
      res.status = 404;
      res.set_content("no such model", "text/plain");
    });
    HttpBackend backend(fast_config(server.endpoint()));
    try {
      backend.complete("draft", simple_messages());
      FAIL("expected RemoteStatus");
    } catch (const RemoteStatus& e) {
      CHECK(e.status == 404);
    }
    CHECK(server.hits() == 1);
  }
}

TEST_CASE("persistent failures end in a retries-exhausted error") {
  StubServer server;
  server.set_handler([](const httplib::Request&, httplib::Response& res) {
    res.status = 503;
  });
  BackendConfig cfg = fast_config(server.endpoint());
  cfg.max_retries = 2;
  HttpBackend backend(cfg);
  try {
    backend.complete("draft", simple_messages());
    FAIL("expected RetriesExhausted");
  } catch (const RetriesExhausted& e) {
    CHECK(std::string(e.what()).find("3 attempts") != std::string::npos);
    CHECK(std::string(e.what()).find("503") != std::string::npos);
  }
  CHECK(server.hits() == 3);  // initial try + 2 retries
}

TEST_CASE("zero retries surfaces the underlying error type") {
  SUBCASE("transient status") {
    StubServer server;
    server.set_handler([](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
    });
    BackendConfig cfg = fast_config(server.endpoint());
    cfg.max_retries = 0;
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete("draft", simple_messages()), RemoteStatus);
    CHECK(server.hits() == 1);
  }
  SUBCASE("connection failure") {
    BackendConfig cfg = fast_config("http://127.0.0.1:1/v1");  // nothing listens
    cfg.max_retries = 0;
    cfg.timeout_s = 1.0;
    HttpBackend backend(cfg);
    try {
      backend.complete("draft", simple_messages());
      FAIL("expected Transport or Timeout");
    } catch (const Transport&) {
    } catch (const Timeout&) {
    }
  }
}

TEST_CASE("a missing credential fails before any network traffic") {
  StubServer server;
  unsetenv("COUNSEL_ABSENT_KEY");
  BackendConfig cfg = fast_config(server.endpoint());
  cfg.api_key_env = "COUNSEL_ABSENT_KEY";
  HttpBackend backend(cfg);
  try {
    backend.complete("draft", simple_messages());
    FAIL("expected MissingCredential");
  } catch (const MissingCredential& e) {
    CHECK(std::string(e.what()).find("COUNSEL_ABSENT_KEY") != std::string::npos);
  }
  CHECK(server.hits() == 0);
}

TEST_CASE("malformed completion bodies are rejected without retry") {
  StubServer server;
  server.set_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"unexpected": true})", "application/json");
  });
  HttpBackend backend(fast_config(server.endpoint()));
  try {
    backend.complete("draft", simple_messages());
    FAIL("expected malformed-reply error");
  } catch (const Error& e) {
    CHECK(e.code() == "malformed-reply");
  }
  CHECK(server.hits() == 1);
}

TEST_CASE("configuration validation rejects out-of-range values") {
  BackendConfig cfg = fast_config("http://x/v1");
  cfg.temperature = 2.5;
  CHECK_THROWS_AS(validate_backend_config(cfg), ConfigError);
  cfg = fast_config("http://x/v1");
  cfg.max_tokens = 0;
  CHECK_THROWS_AS(validate_backend_config(cfg), ConfigError);
  cfg = fast_config("http://x/v1");
  cfg.timeout_s = -1;
  CHECK_THROWS_AS(validate_backend_config(cfg), ConfigError);
  cfg = fast_config("http://x/v1");
  cfg.max_retries = -1;
  CHECK_THROWS_AS(validate_backend_config(cfg), ConfigError);
  cfg = fast_config("http://x/v1");
  cfg.backoff_factor = 0.5;
  CHECK_THROWS_AS(validate_backend_config(cfg), ConfigError);
  CHECK_NOTHROW(validate_backend_config(fast_config("http://x/v1")));
}

TEST_CASE("message digests are order- and content-sensitive") {
  const auto a = simple_messages();
  auto b = a;
  b[1].content = "你好！";
  CHECK(digest_messages(a) != digest_messages(b));
  auto c = a;
  std::swap(c[0], c[1]);
  CHECK(digest_messages(a) != digest_messages(c));
  CHECK(digest_messages(a) == digest_messages(simple_messages()));
}
