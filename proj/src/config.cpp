#include "counsel/config.hpp"

#include <fstream>

#include "json.hpp"

namespace counsel {

namespace {

using json = nlohmann::json;

void parse_agent_options(const json& j, OrchestratorConfig& cfg) {
  if (!j.is_object()) throw ConfigError("orchestrator.agent_options must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_object()) {
      throw ConfigError("agent_options." + it.key() + " must be an object");
    }
    AgentOptions opts;
    if (it.value().contains("temperature")) {
      opts.temperature = it.value().at("temperature").get<double>();
    }
    if (it.value().contains("max_tokens")) {
      opts.max_tokens = it.value().at("max_tokens").get<int>();
    }
    cfg.agent_options[it.key()] = opts;
  }
}

}  // namespace

AppConfig AppConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file: " + path.string());
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed config JSON in " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");

  AppConfig cfg;
  try {
    if (j.contains("backend")) {
      const json& b = j.at("backend");
      cfg.backend_mode = b.value("mode", cfg.backend_mode);
      cfg.backend.endpoint = b.value("endpoint", cfg.backend.endpoint);
      cfg.backend.model_id = b.value("model_id", cfg.backend.model_id);
      cfg.backend.temperature = b.value("temperature", cfg.backend.temperature);
      cfg.backend.max_tokens = b.value("max_tokens", cfg.backend.max_tokens);
      cfg.backend.timeout_s = b.value("timeout_s", cfg.backend.timeout_s);
      cfg.backend.max_retries = b.value("max_retries", cfg.backend.max_retries);
      cfg.backend.api_key_env = b.value("api_key_env", cfg.backend.api_key_env);
      cfg.backend.backoff_base_ms =
          b.value("backoff_base_ms", cfg.backend.backoff_base_ms);
      cfg.backend.backoff_cap_ms =
          b.value("backoff_cap_ms", cfg.backend.backoff_cap_ms);
      cfg.backend.backoff_factor =
          b.value("backoff_factor", cfg.backend.backoff_factor);
      cfg.backend.jitter = b.value("jitter", cfg.backend.jitter);
      if (b.contains("script_path")) {
        cfg.script_path = b.at("script_path").get<std::string>();
      }
    }
    if (j.contains("orchestrator")) {
      const json& o = j.at("orchestrator");
      cfg.orchestrator.max_iterations =
          o.value("max_iterations", cfg.orchestrator.max_iterations);
      cfg.orchestrator.top_k_statutes =
          o.value("top_k_statutes", cfg.orchestrator.top_k_statutes);
      cfg.orchestrator.wall_clock_budget_s =
          o.value("wall_clock_budget_s", cfg.orchestrator.wall_clock_budget_s);
      if (o.contains("agent_options")) {
        parse_agent_options(o.at("agent_options"), cfg.orchestrator);
      }
    }
    if (j.contains("corpus_path")) cfg.corpus_path = j.at("corpus_path").get<std::string>();
    if (j.contains("index_cache_path")) {
      cfg.index_cache_path = j.at("index_cache_path").get<std::string>();
    }
    if (j.contains("prompt_dir")) cfg.prompt_dir = j.at("prompt_dir").get<std::string>();
    if (j.contains("trace_path")) cfg.trace_path = j.at("trace_path").get<std::string>();
    cfg.bind_address = j.value("bind_address", cfg.bind_address);
    cfg.port = j.value("port", cfg.port);
    cfg.log_level = j.value("log_level", cfg.log_level);
  } catch (const json::exception& e) {
    throw ConfigError("invalid config value: " + std::string(e.what()));
  }

  // Input paths are resolved against the config file's directory so a config
  // works no matter where the process is launched from. trace_path is an
  // output location and stays relative to the working directory.
  const std::filesystem::path base = path.parent_path();
  const auto anchor = [&base](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  anchor(cfg.script_path);
  anchor(cfg.corpus_path);
  anchor(cfg.index_cache_path);
  anchor(cfg.prompt_dir);

  if (cfg.backend_mode != "http" && cfg.backend_mode != "scripted") {
    throw ConfigError("backend.mode must be \"http\" or \"scripted\", got \"" +
                      cfg.backend_mode + "\"");
  }
  validate_backend_config(cfg.backend);
  if (cfg.orchestrator.max_iterations < 0) {
    throw ConfigError("orchestrator.max_iterations must be >= 0");
  }
  if (cfg.orchestrator.top_k_statutes <= 0) {
    throw ConfigError("orchestrator.top_k_statutes must be positive");
  }
  if (cfg.orchestrator.wall_clock_budget_s <= 0.0) {
    throw ConfigError("orchestrator.wall_clock_budget_s must be positive");
  }
  if (cfg.port < 0 || cfg.port > 65535) throw ConfigError("port out of range");

  // Referenced input files must exist now, not when first used.
  if (cfg.backend_mode == "scripted") {
    if (cfg.script_path.empty()) {
      throw ConfigError("backend.mode is \"scripted\" but backend.script_path is unset");
    }
    if (!std::filesystem::exists(cfg.script_path)) {
      throw ConfigError("backend.script_path does not exist: " +
                        cfg.script_path.string());
    }
  } else if (cfg.backend.endpoint.empty()) {
    throw ConfigError("backend.endpoint is required in http mode");
  }
  if (!cfg.corpus_path.empty() && !std::filesystem::exists(cfg.corpus_path)) {
    throw ConfigError("corpus_path does not exist: " + cfg.corpus_path.string());
  }
  if (!cfg.index_cache_path.empty() &&
      !std::filesystem::exists(cfg.index_cache_path)) {
    throw ConfigError("index_cache_path does not exist: " +
                      cfg.index_cache_path.string());
  }
  if (!cfg.prompt_dir.empty() && !std::filesystem::is_directory(cfg.prompt_dir)) {
    throw ConfigError("prompt_dir is not a directory: " + cfg.prompt_dir.string());
  }
  return cfg;
}

PromptSet AppConfig::prompts() const {
  if (prompt_dir.empty()) return PromptSet::builtin();
  return PromptSet::load(prompt_dir);
}

std::unique_ptr<ChatBackend> make_backend(const AppConfig& config) {
  if (config.backend_mode == "scripted") {
    return std::make_unique<ScriptedBackend>(load_scenario(config.script_path));
  }
  return std::make_unique<HttpBackend>(config.backend);
}

}  // namespace counsel
