#include "counsel/llm_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

#include "counsel/text.hpp"
#include "httplib.h"
#include "json.hpp"

namespace counsel {

namespace {

void validate_messages(const std::vector<ChatMessage>& messages) {
  if (messages.empty()) {
    throw Error("invalid-messages", "message list must be non-empty");
  }
  if (messages.front().role == MessageRole::assistant) {
    throw Error("invalid-messages", "conversation must start with system or user");
  }
}

double backoff_delay_ms(const BackendConfig& cfg, int attempt) {
  double delay = cfg.backoff_base_ms * std::pow(cfg.backoff_factor, attempt);
  delay = std::min(delay, cfg.backoff_cap_ms);
  if (cfg.jitter) {
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::uniform_real_distribution<double> dist(0.0, delay);
    delay = dist(rng);
  }
  return delay;
}

bool is_timeout(httplib::Error e) {
  return e == httplib::Error::ConnectionTimeout || e == httplib::Error::Read ||
         e == httplib::Error::Write;
}

}  // namespace

const char* to_string(MessageRole role) {
  switch (role) {
    case MessageRole::system: return "system";
    case MessageRole::user: return "user";
    case MessageRole::assistant: return "assistant";
  }
  return "user";
}

void validate_backend_config(const BackendConfig& config) {
  if (config.temperature < 0.0 || config.temperature > 2.0) {
    throw ConfigError("temperature must be within [0, 2]");
  }
  if (config.max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  if (config.timeout_s <= 0.0) throw ConfigError("timeout_s must be positive");
  if (config.max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (config.backoff_factor < 1.0) {
    throw ConfigError("backoff_factor must be >= 1");
  }
}

std::string digest_messages(const std::vector<ChatMessage>& messages) {
  std::string buf;
  for (const ChatMessage& m : messages) {
    buf += to_string(m.role);
    buf.push_back('\x1e');
    buf += m.content;
    buf.push_back('\x1e');
  }
  return fnv1a64_hex(buf);
}

ScriptedScenario ScriptedScenario::from_role_lists(
    const std::map<std::string, std::vector<std::string>>& lists) {
  ScriptedScenario s;
  for (const auto& [role, replies] : lists) {
    for (std::size_t i = 0; i < replies.size(); ++i) {
      s.replies[{role, static_cast<int>(i)}] = replies[i];
    }
  }
  return s;
}

ScriptedScenario load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot read scenario file: " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return load_scenario_text(buf.str());
}

ScriptedScenario load_scenario_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error("scenario-format", "malformed scenario JSON");
  if (!j.is_object()) throw Error("scenario-format", "scenario must be a JSON object");
  std::map<std::string, std::vector<std::string>> lists;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_array()) {
      throw Error("scenario-format", "scenario role '" + it.key() +
                                         "' must map to an array of replies");
    }
    for (const auto& entry : it.value()) {
      if (entry.is_string()) {
        lists[it.key()].push_back(entry.get<std::string>());
      } else {
        lists[it.key()].push_back(entry.dump());
      }
    }
  }
  return ScriptedScenario::from_role_lists(lists);
}

ScriptedBackend::ScriptedBackend(ScriptedScenario scenario)
    : scenario_(std::move(scenario)) {}

std::string ScriptedBackend::complete(const std::string& agent_role,
                                      const std::vector<ChatMessage>& messages,
                                      const CallOptions&) {
  validate_messages(messages);
  std::lock_guard<std::mutex> lock(mu_);
  const int index = counters_[agent_role]++;
  const auto it = scenario_.replies.find({agent_role, index});
  if (it == scenario_.replies.end()) throw ScriptExhausted(agent_role, index);
  log_.push_back({agent_role, index, digest_messages(messages), messages.size()});
  return it->second;
}

std::vector<CallRecord> ScriptedBackend::call_log() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  validate_backend_config(config_);
  if (config_.endpoint.empty()) throw ConfigError("backend endpoint is empty");
}

std::string HttpBackend::complete(const std::string&,
                                  const std::vector<ChatMessage>& messages,
                                  const CallOptions& options) {
  validate_messages(messages);

  std::string bearer;
  if (!config_.api_key_env.empty()) {
    const char* value = std::getenv(config_.api_key_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw MissingCredential(config_.api_key_env);
    }
    bearer = value;
  }

  // Split "scheme://host[:port][/prefix]" into client base and path prefix.
  std::string base = config_.endpoint;
  std::string prefix;
  const std::size_t scheme = base.find("://");
  if (scheme != std::string::npos) {
    const std::size_t slash = base.find('/', scheme + 3);
    if (slash != std::string::npos) {
      prefix = base.substr(slash);
      base = base.substr(0, slash);
    }
  }
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const std::string path = prefix + "/chat/completions";

  nlohmann::json body;
  body["model"] = config_.model_id;
  body["temperature"] = options.temperature.value_or(config_.temperature);
  body["max_tokens"] = options.max_tokens.value_or(config_.max_tokens);
  body["messages"] = nlohmann::json::array();
  for (const ChatMessage& m : messages) {
    body["messages"].push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  const std::string payload = body.dump();

  httplib::Client client(base);
  const auto secs = static_cast<time_t>(config_.timeout_s);
  const auto usecs =
      static_cast<time_t>((config_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);

  std::string last_cause;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    httplib::Result res = client.Post(path, headers, payload, "application/json");
    if (res) {
      const int status = res->status;
      if (status >= 200 && status < 300) {
        const auto j =
            nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty() ||
            !j["choices"][0].contains("message") ||
            !j["choices"][0]["message"].contains("content") ||
            !j["choices"][0]["message"]["content"].is_string()) {
          throw Error("malformed-reply",
                      "backend reply is not a chat completion: " +
                          res->body.substr(0, 200));
        }
        return j["choices"][0]["message"]["content"].get<std::string>();
      }
      const bool transient = status == 429 || (status >= 500 && status < 600);
      if (!transient) throw RemoteStatus(status, res->body.substr(0, 200));
      if (config_.max_retries == 0) throw RemoteStatus(status, res->body.substr(0, 200));
      last_cause = "status " + std::to_string(status);
    } else {
      const httplib::Error err = res.error();
      const std::string what = httplib::to_string(err);
      if (config_.max_retries == 0) {
        if (is_timeout(err)) throw Timeout(what);
        throw Transport(what);
      }
      last_cause = what;
    }
    if (attempt < config_.max_retries) {
      const double delay = backoff_delay_ms(config_, attempt);
      std::this_thread::sleep_for(
          std::chrono::microseconds(static_cast<long long>(delay * 1000.0)));
    }
  }
  throw RetriesExhausted(config_.max_retries + 1, last_cause);
}

}  // namespace counsel
