#pragma once

#include <string>
#include <vector>

#include "counsel/errors.hpp"

namespace counsel {

enum class TerminalReason { pass, decision_empty, budget_exhausted };

const char* to_string(TerminalReason reason);
TerminalReason terminal_reason_from_string(const std::string& s);

// One agent operation. `agent_role` is the step kind (element, draft,
// manager, format_check, apply, law_search, integrate, content_check);
// `label` carries the operation detail (a manager step's decision, a law
// step's terms, ...). Digests are fnv1a64 over the operation's primary
// input and output texts.
struct TraceStep {
  int index = 0;
  std::string agent_role;
  std::string label;
  std::string input_digest;
  std::string output_digest;
  double duration_ms = 0.0;
  std::vector<std::string> warnings;

  bool operator==(const TraceStep&) const = default;
};

struct MalformedTrace : Error {
  explicit MalformedTrace(const std::string& m) : Error("malformed-trace", m) {}
};

// Audit record of one consultation run.
struct OrchestrationTrace {
  std::string trace_id;
  std::string query_id;
  std::vector<TraceStep> steps;
  int iterations_run = 0;
  TerminalReason terminal_reason = TerminalReason::pass;
  // When set, recorded durations are forced to zero so traces are
  // byte-reproducible (test mode).
  bool freeze_time = false;

  TraceStep& add_step(std::string agent_role, std::string label,
                      std::string input_digest, std::string output_digest,
                      double duration_ms, std::vector<std::string> warnings = {});
};

// One-line JSON form used for persistence (one trace per JSONL line).
std::string trace_to_json(const OrchestrationTrace& trace);
OrchestrationTrace trace_from_json(const std::string& json_line);

// Renders a step-by-step report. Pure: the same trace always yields the
// same bytes. Throws MalformedTrace for empty traces or out-of-order steps.
std::string replay_trace(const OrchestrationTrace& trace);

}  // namespace counsel
