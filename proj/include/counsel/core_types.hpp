#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "counsel/errors.hpp"

namespace counsel {

// A user's consultation request. `text` must be non-empty after trimming.
struct ConsultationQuery {
  std::string id;
  std::string text;
  std::map<std::string, std::string> metadata;

  bool operator==(const ConsultationQuery&) const = default;
};

struct Entity {
  std::string name;
  std::string type_label;
  std::map<std::string, std::string> attributes;

  bool operator==(const Entity&) const = default;
};

struct Event {
  std::string description;
  std::optional<std::string> time;
  std::map<std::string, std::string> attributes;

  bool operator==(const Event&) const = default;
};

// Directed edge between two entities, referenced by name.
struct Relationship {
  std::string relation_type;
  std::string source;
  std::string target;

  bool operator==(const Relationship&) const = default;
};

// Structured case description extracted from a consultation. The six
// members mirror the six top-level keys of the JSON form (see kGraphKeys).
struct ElementGraph {
  std::vector<Entity> entities;
  std::vector<Event> events;
  std::vector<Relationship> relationships;
  std::vector<std::string> user_claims;
  std::vector<std::string> key_facts;
  std::vector<std::string> legal_questions;

  bool operator==(const ElementGraph&) const = default;
};

// JSON schema key order. Serialization always emits exactly these keys in
// exactly this order.
inline constexpr std::array<const char*, 6> kGraphKeys = {
    "entities",   "events",    "relationships",
    "user_claims", "key_facts", "legal_questions"};

struct Violation {
  std::string code;    // machine-readable, e.g. "unresolved-endpoint"
  std::string path;    // JSON-pointer-like location, e.g. "relationships[2].source"
  std::string detail;  // human-readable explanation

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

// Prompt assembled from a serialized graph and the raw question.
// full_text == graph_section + separator + query_section, always.
struct EncodedPrompt {
  std::string graph_section;
  std::string query_section;
  std::string separator;
  std::string full_text;

  bool operator==(const EncodedPrompt&) const = default;
};

inline constexpr const char* kPromptSeparator = "\n\nUser Question:\n";

// Working answer text as it moves through the refinement loop.
struct Draft {
  std::string text;
  int iteration = 0;
  std::vector<std::string> applied_suggestions;
  std::vector<std::string> integrated_statute_ids;  // "law#article" keys, set semantics

  bool operator==(const Draft&) const = default;
};

struct StatuteCitation {
  std::string law_name;
  std::string article_id;
  std::string text;

  bool operator==(const StatuteCitation&) const = default;
};

// Final dual-section answer: free-text response plus the provisions it
// rests on.
struct LegalOpinion {
  std::string response;
  std::vector<StatuteCitation> legal_basis;
  std::string source_query_id;

  bool operator==(const LegalOpinion&) const = default;
};

struct InvalidGraph : Error {
  explicit InvalidGraph(ValidationReport r)
      : Error("invalid-graph", "graph failed validation: " + r.summary()),
        report(std::move(r)) {}
  ValidationReport report;
};

struct NoStructuredPayload : Error {
  explicit NoStructuredPayload(
      const std::string& m = "no well-formed JSON object found in reply")
      : Error("no-structured-payload", m) {}
};

struct SchemaMismatch : Error {
  explicit SchemaMismatch(std::string path, const std::string& m)
      : Error("schema-mismatch", m + " at " + path), key_path(std::move(path)) {}
  std::string key_path;
};

// Structured payload parsed but violates graph invariants. `line` is used
// by record-oriented loaders; 0 means "not line-addressed".
struct InvariantViolation : Error {
  explicit InvariantViolation(ValidationReport r)
      : Error("invariant-violation", "graph violates invariants: " + r.summary()),
        report(std::move(r)),
        line(0) {}
  InvariantViolation(std::size_t line_no, const std::string& code)
      : Error("invariant-violation",
              code + " (line " + std::to_string(line_no) + ")"),
        line(line_no) {}
  ValidationReport report;
  std::size_t line;
};

// Checks every graph invariant and reports all violations (never just the
// first): entities non-empty, entity names non-empty and unique, event
// descriptions non-empty, relationship types non-empty and endpoints
// resolving to entity names, and no empty strings in the three text lists.
ValidationReport validate_graph(const ElementGraph& g);

// Deterministic JSON text: the six keys of kGraphKeys in schema order,
// compact separators, UTF-8 passed through unescaped. Equal graphs always
// produce identical bytes. Throws InvalidGraph when validation fails.
std::string serialize_graph(const ElementGraph& g);

// Inverse of serialize_graph, tolerant of chat wrapping: strips one
// Markdown code fence if present, then scans for the first balanced JSON
// object and parses it strictly against the six-key schema.
// Throws NoStructuredPayload / SchemaMismatch / InvariantViolation.
ElementGraph parse_graph(const std::string& raw);

// Builds the prompt u = [serialized graph; separator; question].
// Throws InvalidGraph / EmptyQuery.
EncodedPrompt encode_prompt(const ElementGraph& g, const ConsultationQuery& q);

// Fixed-width rendering of a final opinion: a "Response" block followed by
// a "Legal Basis" block with one numbered entry per citation. Deterministic.
std::string render_opinion(const LegalOpinion& opinion);

}  // namespace counsel
