#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "counsel/errors.hpp"

namespace counsel {

enum class MessageRole { system, user, assistant };

const char* to_string(MessageRole role);

struct ChatMessage {
  MessageRole role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

// Per-call overrides of the configured decoding defaults.
struct CallOptions {
  std::optional<double> temperature;
  std::optional<int> max_tokens;
};

struct BackendConfig {
  std::string endpoint;  // e.g. "http://127.0.0.1:8000/v1"
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 1024;
  double timeout_s = 30.0;
  int max_retries = 3;
  // Name of the environment variable holding the bearer token. Empty means
  // the endpoint is unauthenticated; non-empty but unset in the
  // environment is an error raised before any network activity.
  std::string api_key_env;
  double backoff_base_ms = 500.0;
  double backoff_cap_ms = 8000.0;
  double backoff_factor = 2.0;
  bool jitter = true;
};

struct Transport : Error {
  explicit Transport(const std::string& m) : Error("transport", m) {}
};

struct Timeout : Error {
  explicit Timeout(const std::string& m) : Error("timeout", m) {}
};

struct RemoteStatus : Error {
  RemoteStatus(int status, const std::string& body_excerpt)
      : Error("remote-status",
              "backend returned status " + std::to_string(status) +
                  (body_excerpt.empty() ? "" : ": " + body_excerpt)),
        status(status) {}
  int status;
};

struct RetriesExhausted : Error {
  RetriesExhausted(int attempts, const std::string& last_cause)
      : Error("retries-exhausted", "gave up after " + std::to_string(attempts) +
                                       " attempts; last error: " + last_cause) {}
};

struct MissingCredential : Error {
  explicit MissingCredential(const std::string& var)
      : Error("missing-credential",
              "environment variable " + var + " is not set") {}
};

struct ScriptExhausted : Error {
  ScriptExhausted(const std::string& role, int index)
      : Error("script-exhausted", "no scripted reply for agent role '" + role +
                                      "' call #" + std::to_string(index)),
        agent_role(role),
        call_index(index) {}
  std::string agent_role;
  int call_index;
};

// One chat completion provider. `agent_role` names the calling agent
// ("element", "draft", "manager", ...); HTTP backends ignore it while the
// scripted backend keys its replies on it.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  // Returns the assistant reply text. `messages` must be non-empty and
  // must start with a system or user message.
  virtual std::string complete(const std::string& agent_role,
                               const std::vector<ChatMessage>& messages,
                               const CallOptions& options = {}) = 0;
};

// Deterministic replies keyed by (agent_role, per-role call index).
struct ScriptedScenario {
  std::map<std::pair<std::string, int>, std::string> replies;

  static ScriptedScenario from_role_lists(
      const std::map<std::string, std::vector<std::string>>& lists);
  bool empty() const { return replies.empty(); }
};

// Loads a scenario JSON file: an object mapping agent role to an array of
// replies. Array entries may be strings or JSON objects; objects are
// serialized to compact JSON text (convenient for element-graph replies).
ScriptedScenario load_scenario(const std::filesystem::path& path);

// Same format, parsed from an in-memory JSON string.
ScriptedScenario load_scenario_text(const std::string& text);

struct CallRecord {
  std::string agent_role;
  int call_index;
  std::string request_digest;  // fnv1a64 over the serialized messages
  std::size_t message_count;
};

// Thread-safe mock backend for tests and offline runs. Each call consumes
// the next scripted reply for its role; running past the script raises
// ScriptExhausted rather than repeating.
class ScriptedBackend : public ChatBackend {
 public:
  explicit ScriptedBackend(ScriptedScenario scenario);

  std::string complete(const std::string& agent_role,
                       const std::vector<ChatMessage>& messages,
                       const CallOptions& options = {}) override;

  std::vector<CallRecord> call_log() const;

 private:
  mutable std::mutex mu_;
  ScriptedScenario scenario_;
  std::map<std::string, int> counters_;
  std::vector<CallRecord> log_;
};

// OpenAI-style chat-completions client (POST {endpoint}/chat/completions).
// Transient failures (connect/read timeouts, transport errors, HTTP 429
// and 5xx) are retried up to max_retries extra attempts with exponential
// backoff (base * factor^attempt, capped, with optional full jitter).
// Other HTTP statuses fail immediately with RemoteStatus.
class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(BackendConfig config);

  std::string complete(const std::string& agent_role,
                       const std::vector<ChatMessage>& messages,
                       const CallOptions& options = {}) override;

  const BackendConfig& config() const { return config_; }

 private:
  BackendConfig config_;
};

// Validates shared invariants (temperature range, positive timeout, ...).
// Throws ConfigError.
void validate_backend_config(const BackendConfig& config);

std::string digest_messages(const std::vector<ChatMessage>& messages);

}  // namespace counsel
