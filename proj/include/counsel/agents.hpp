#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "counsel/core_types.hpp"
#include "counsel/llm_backend.hpp"
#include "counsel/prompts.hpp"
#include "counsel/statute_index.hpp"
#include "counsel/trace.hpp"

namespace counsel {

enum class DecisionKind { Pass, FormatCheck, LawSearch, Both };

const char* to_string(DecisionKind kind);

struct ManagerDecision {
  DecisionKind kind = DecisionKind::Pass;
  std::string raw_text;
};

struct Suggestions {
  std::vector<std::string> items;
  std::string raw_text;
};

struct StatuteList {
  std::vector<SearchHit> items;      // score-descending, deduplicated
  std::vector<std::string> query_terms;
};

struct AgentOptions {
  std::optional<double> temperature;
  std::optional<int> max_tokens;
};

// Shared plumbing for one consultation run. When `trace` is set, every
// agent operation appends exactly one step (retries within an operation
// become warnings on that step, not extra steps). `options` holds per-role
// decoding overrides keyed by backend role name.
struct AgentContext {
  ChatBackend& backend;
  const PromptSet& prompts;
  OrchestrationTrace* trace = nullptr;
  std::map<std::string, AgentOptions> options;
  bool freeze_time = false;
};

struct ExtractionFailed : Error {
  ExtractionFailed(std::string first, std::string second, const std::string& why)
      : Error("extraction-failed", "element extraction failed twice: " + why),
        first_reply(std::move(first)),
        second_reply(std::move(second)) {}
  std::string first_reply;
  std::string second_reply;
};

struct EmptyDraft : Error {
  explicit EmptyDraft(const std::string& m = "draft agent returned empty text")
      : Error("empty-draft", m) {}
};

struct FormatCheckEmpty : Error {
  explicit FormatCheckEmpty(
      const std::string& m = "format check produced no suggestions")
      : Error("format-check-empty", m) {}
};

struct EmptyIndex : Error {
  explicit EmptyIndex(const std::string& m = "statute index has no documents")
      : Error("empty-index", m) {}
};

struct SectionMissing : Error {
  explicit SectionMissing(std::string section)
      : Error("section-missing",
              "final opinion is missing the " + section + " section"),
        which(std::move(section)) {}
  std::string which;  // "response" or "legal_basis"
};

// --- pure parsing rules, exposed for direct testing ---

// Case-insensitive token detection over the manager's reply: the tokens
// "FormatCheckAgent" and "LawSearchAgent" select repairs (both present =
// Both) and take precedence over "Pass". No token at all -> nullopt.
std::optional<DecisionKind> detect_decision(std::string_view reply);

// Splits a reply into suggestion items: one per non-empty line after
// stripping leading list markers ("-", "*", bullets, "1." / "1)" / "(1)" /
// "1、" and the like). Order is preserved; blank lines are dropped.
std::vector<std::string> split_suggestions(std::string_view reply);

// Extracts up to `max_terms` search terms: list markers are stripped, then
// lines are further split on ASCII and fullwidth commas/semicolons and
// Chinese enumeration commas. Duplicates are dropped, order preserved.
std::vector<std::string> parse_search_terms(std::string_view reply,
                                            std::size_t max_terms = 5);

struct OpinionSections {
  std::string response;
  std::string legal_basis;
};

// Finds the two labeled sections ("Response" / "Legal Basis", or their
// Chinese equivalents, as a heading line with an optional colon). Returns
// nullopt when either section is absent.
std::optional<OpinionSections> split_opinion_sections(std::string_view reply);

// --- agent operations (one backend call each, plus at most one retry) ---

// Element agent: extracts the element graph from the raw query. A reply
// that fails to parse triggers one corrective retry quoting the expected
// schema; a second failure raises ExtractionFailed with both raw replies.
ElementGraph extract_elements(const ConsultationQuery& query, AgentContext& ctx);

// Draft agent: first answer from the encoded prompt (iteration 0).
Draft draft_initial(const EncodedPrompt& prompt, AgentContext& ctx);

// Manager: reads only the draft text. Unparseable replies get one
// corrective retry, then default to Pass with a warning.
ManagerDecision manager_decide(const Draft& draft, AgentContext& ctx);

// Format-check agent: concrete editing suggestions for the draft.
Suggestions format_suggestions(const Draft& draft, AgentContext& ctx);

// Draft agent applying suggestions: text may change, iteration does not;
// the applied suggestions are appended to the draft's history.
Draft apply_suggestions(const Draft& draft, const Suggestions& suggestions,
                        AgentContext& ctx);

// Law-search agent: asks the backend for up to five search terms, queries
// the index per term, merges hits by (law, article) keeping the best
// score, and returns the global top-k. An unusable term reply falls back
// to the raw query text with a warning.
StatuteList law_search(const ConsultationQuery& query, const Draft& draft,
                       const StatuteIndex& index, std::size_t top_k,
                       AgentContext& ctx);

// Draft agent integrating retrieved provisions; integrated statute ids
// accumulate with set semantics.
Draft integrate_statutes(const Draft& draft, const StatuteList& statutes,
                         AgentContext& ctx);

// Content-check agent: rewrites the draft into the final dual-section
// opinion. Missing sections get one corrective retry, then SectionMissing.
// When `index` is given, each cited provision in the legal-basis section
// is resolved to its full article text.
LegalOpinion content_check(const ConsultationQuery& query, const Draft& draft,
                           const StatuteIndex* index, AgentContext& ctx);

}  // namespace counsel
