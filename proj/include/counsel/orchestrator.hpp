#pragma once

#include <map>
#include <string>

#include "counsel/agents.hpp"
#include "counsel/core_types.hpp"
#include "counsel/llm_backend.hpp"
#include "counsel/prompts.hpp"
#include "counsel/statute_index.hpp"
#include "counsel/trace.hpp"

namespace counsel {

struct OrchestratorConfig {
  int max_iterations = 5;          // repair-loop budget T
  int top_k_statutes = 3;          // provisions handed to integration
  double wall_clock_budget_s = 120.0;
  // Freezes recorded durations and trace-id timestamps so repeated runs
  // are byte-identical.
  bool test_mode = false;
  std::map<std::string, AgentOptions> agent_options;  // keyed by backend role
};

struct ConsultResult {
  LegalOpinion opinion;
  OrchestrationTrace trace;
  ElementGraph graph;
};

// Any failure inside a consultation run; carries the partial trace
// recorded up to the failing step and the failing error's code.
struct ConsultError : Error {
  ConsultError(const Error& cause, OrchestrationTrace trace)
      : Error("consult-failed", cause.what()),
        cause_code(cause.code()),
        partial_trace(std::move(trace)) {}
  std::string cause_code;
  OrchestrationTrace partial_trace;
};

// Runs one consultation end to end:
//   extract elements -> encode prompt -> initial draft ->
//   loop while t < max_iterations:
//     manager decision; Pass or empty reply exits the loop;
//     otherwise the selected repairs run in order (format fixes before
//     statute search) and t advances;
//   content check always runs after the loop, budget exhausted or not.
// Draft iterations are stamped when a repair mutates the draft, so the
// final draft's iteration never exceeds max_iterations.
ConsultResult consult(const ConsultationQuery& query,
                      const OrchestratorConfig& config, ChatBackend& backend,
                      const StatuteIndex& index,
                      const PromptSet& prompts = PromptSet::builtin());

// Deterministic trace id: a digest of the query text, the orchestration
// parameters, a timestamp (fixed in test mode), and a per-process sequence
// number, so concurrent runs get distinct ids.
std::string make_trace_id(const ConsultationQuery& query,
                          const OrchestratorConfig& config);

}  // namespace counsel
