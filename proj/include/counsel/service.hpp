#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "counsel/config.hpp"
#include "counsel/orchestrator.hpp"

namespace counsel {

// Append-only trace storage: an in-memory map for lookups plus a JSONL
// file (one trace per line). put() flushes the file line before returning,
// so a caller that persists-then-responds never acknowledges an
// unpersisted trace.
class TraceStore {
 public:
  // An empty path keeps traces in memory only.
  explicit TraceStore(std::filesystem::path file = {});

  void put(const OrchestrationTrace& trace);
  std::optional<OrchestrationTrace> get(const std::string& trace_id) const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::filesystem::path file_;
  std::map<std::string, OrchestrationTrace> by_id_;
};

// HTTP facade over the consultation pipeline:
//   POST /consult          {"question": "...", "id": "..."} ->
//                          {"response", "legal_basis": [...], "trace_id"}
//   GET  /trace/{id}       persisted trace JSON
//   GET  /healthz          {"status": "ok", "index_doc_count": N}
// Failures map to 400 (bad request), 502 (pipeline/backend error, with the
// partial trace persisted and its id returned), and 503 while draining.
class ConsultService {
 public:
  ConsultService(const AppConfig& config, std::shared_ptr<ChatBackend> backend,
                 std::shared_ptr<const StatuteIndex> index);
  ~ConsultService();

  // Binds and serves on a background thread. Returns the bound port
  // (useful with port 0 for an ephemeral port), or -1 on bind failure.
  int start();

  // Stops accepting new consultations (they get 503), then shuts the
  // listener down and joins the server thread.
  void stop();

  const TraceStore& traces() const { return traces_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  TraceStore traces_;
};

}  // namespace counsel
