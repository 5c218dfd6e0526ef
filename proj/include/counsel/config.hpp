#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "counsel/llm_backend.hpp"
#include "counsel/orchestrator.hpp"
#include "counsel/prompts.hpp"

namespace counsel {

// Process-level configuration, loaded from one JSON file. Secrets never
// appear here: the backend only names the environment variable that holds
// its key.
struct AppConfig {
  std::string backend_mode = "http";  // "http" or "scripted"
  BackendConfig backend;
  std::filesystem::path script_path;  // scripted mode: scenario JSON
  OrchestratorConfig orchestrator;
  std::filesystem::path corpus_path;       // statutes JSONL
  std::filesystem::path index_cache_path;  // optional prebuilt index
  std::filesystem::path prompt_dir;        // optional prompt overrides
  std::filesystem::path trace_path = "traces.jsonl";
  std::string bind_address = "127.0.0.1";
  int port = 8080;
  std::string log_level = "info";

  // Parses and validates; referenced input paths must exist. Throws
  // ConfigError naming the offending key or path.
  static AppConfig load(const std::filesystem::path& path);

  PromptSet prompts() const;
};

// Instantiates the configured backend (HttpBackend, or ScriptedBackend
// loaded from script_path).
std::unique_ptr<ChatBackend> make_backend(const AppConfig& config);

}  // namespace counsel
