#include "counsel/orchestrator.hpp"

#include <atomic>
#include <chrono>

#include "counsel/text.hpp"

namespace counsel {

namespace {

std::atomic<std::uint64_t> g_trace_sequence{0};

}  // namespace

std::string make_trace_id(const ConsultationQuery& query,
                          const OrchestratorConfig& config) {
  std::string seed = query.text;
  seed.push_back('\x1f');
  seed += std::to_string(config.max_iterations) + "," +
          std::to_string(config.top_k_statutes);
  seed.push_back('\x1f');
  if (config.test_mode) {
    seed += "0";
  } else {
    seed += std::to_string(std::chrono::duration_cast<std::chrono::nanoseconds>(
                               std::chrono::system_clock::now().time_since_epoch())
                               .count());
  }
  seed.push_back('\x1f');
  seed += std::to_string(g_trace_sequence.fetch_add(1));
  return fnv1a64_hex(seed);
}

ConsultResult consult(const ConsultationQuery& query,
                      const OrchestratorConfig& config, ChatBackend& backend,
                      const StatuteIndex& index, const PromptSet& prompts) {
  OrchestrationTrace trace;
  trace.query_id = query.id;
  trace.trace_id = make_trace_id(query, config);
  trace.freeze_time = config.test_mode;

  AgentContext ctx{backend, prompts, &trace, config.agent_options,
                   config.test_mode};

  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(config.wall_clock_budget_s));
  const auto check_budget = [&] {
    if (std::chrono::steady_clock::now() >= deadline) {
      throw Error("wall-clock-budget", "consultation exceeded its time budget");
    }
  };

  try {
    const ElementGraph graph = extract_elements(query, ctx);
    const EncodedPrompt prompt = encode_prompt(graph, query);
    Draft draft = draft_initial(prompt, ctx);

    int t = 0;
    TerminalReason reason = TerminalReason::budget_exhausted;
    while (t < config.max_iterations) {
      check_budget();
      const ManagerDecision decision = manager_decide(draft, ctx);
      if (decision.kind == DecisionKind::Pass) {
        reason = trim(decision.raw_text).empty() ? TerminalReason::decision_empty
                                                 : TerminalReason::pass;
        break;
      }
      if (decision.kind == DecisionKind::FormatCheck ||
          decision.kind == DecisionKind::Both) {
        const Suggestions suggestions = format_suggestions(draft, ctx);
        draft = apply_suggestions(draft, suggestions, ctx);
        draft.iteration = t + 1;
      }
      if (decision.kind == DecisionKind::LawSearch ||
          decision.kind == DecisionKind::Both) {
        const StatuteList statutes = law_search(
            query, draft, index, static_cast<std::size_t>(config.top_k_statutes),
            ctx);
        if (!statutes.items.empty()) {
          draft = integrate_statutes(draft, statutes, ctx);
        } else if (!trace.steps.empty()) {
          trace.steps.back().warnings.push_back(
              "no provisions retrieved; integration skipped");
        }
        draft.iteration = t + 1;
      }
      ++t;
    }
    trace.iterations_run = t;
    trace.terminal_reason = reason;

    LegalOpinion opinion = content_check(query, draft, &index, ctx);
    return {std::move(opinion), std::move(trace), graph};
  } catch (const ConsultError&) {
    throw;
  } catch (const Error& e) {
    throw ConsultError(e, std::move(trace));
  }
}

}  // namespace counsel
