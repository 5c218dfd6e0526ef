#include "counsel/core_types.hpp"

#include <set>
#include <sstream>

#include "counsel/text.hpp"
#include "json.hpp"

namespace counsel {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string index_path(const char* key, std::size_t i, const char* field = nullptr) {
  std::ostringstream os;
  os << key << '[' << i << ']';
  if (field) os << '.' << field;
  return os.str();
}

void check_text_list(const std::vector<std::string>& items, const char* key,
                     const char* code, std::vector<Violation>& out) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (trim(items[i]).empty()) {
      out.push_back({code, index_path(key, i), "entry must be a non-empty string"});
    }
  }
}

ordered_json graph_to_json(const ElementGraph& g) {
  ordered_json j = ordered_json::object();
  j["entities"] = ordered_json::array();
  for (const Entity& e : g.entities) {
    ordered_json je = ordered_json::object();
    je["name"] = e.name;
    je["type"] = e.type_label;
    je["attributes"] = ordered_json::object();
    for (const auto& [k, v] : e.attributes) je["attributes"][k] = v;
    j["entities"].push_back(std::move(je));
  }
  j["events"] = ordered_json::array();
  for (const Event& e : g.events) {
    ordered_json je = ordered_json::object();
    je["description"] = e.description;
    if (e.time.has_value()) je["time"] = *e.time;
    if (!e.attributes.empty()) {
      je["attributes"] = ordered_json::object();
      for (const auto& [k, v] : e.attributes) je["attributes"][k] = v;
    }
    j["events"].push_back(std::move(je));
  }
  j["relationships"] = ordered_json::array();
  for (const Relationship& r : g.relationships) {
    ordered_json jr = ordered_json::object();
    jr["type"] = r.relation_type;
    jr["source"] = r.source;
    jr["target"] = r.target;
    j["relationships"].push_back(std::move(jr));
  }
  j["user_claims"] = g.user_claims;
  j["key_facts"] = g.key_facts;
  j["legal_questions"] = g.legal_questions;
  return j;
}

std::map<std::string, std::string> parse_attributes(const ordered_json& j,
                                                    const std::string& path) {
  std::map<std::string, std::string> out;
  if (!j.is_object()) throw SchemaMismatch(path, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_string()) {
      throw SchemaMismatch(path + "." + it.key(), "expected a string value");
    }
    out[it.key()] = it.value().get<std::string>();
  }
  return out;
}

std::string require_string(const ordered_json& j, const char* field,
                           const std::string& path) {
  if (!j.contains(field)) throw SchemaMismatch(path + "." + field, "missing key");
  const auto& v = j.at(field);
  if (!v.is_string()) throw SchemaMismatch(path + "." + field, "expected a string");
  return v.get<std::string>();
}

std::vector<std::string> parse_string_list(const ordered_json& j, const char* key) {
  if (!j.is_array()) throw SchemaMismatch(key, "expected an array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) {
      throw SchemaMismatch(index_path(key, i), "expected a string");
    }
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

ElementGraph graph_from_json(const ordered_json& j) {
  if (!j.is_object()) throw SchemaMismatch("$", "expected an object");
  for (const char* key : kGraphKeys) {
    if (!j.contains(key)) throw SchemaMismatch(key, "missing key");
  }
  ElementGraph g;
  const auto& entities = j.at("entities");
  if (!entities.is_array()) throw SchemaMismatch("entities", "expected an array");
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto& je = entities[i];
    const std::string path = index_path("entities", i);
    if (!je.is_object()) throw SchemaMismatch(path, "expected an object");
    Entity e;
    e.name = require_string(je, "name", path);
    if (je.contains("type")) {
      if (!je.at("type").is_string()) {
        throw SchemaMismatch(path + ".type", "expected a string");
      }
      e.type_label = je.at("type").get<std::string>();
    }
    if (je.contains("attributes")) {
      e.attributes = parse_attributes(je.at("attributes"), path + ".attributes");
    }
    g.entities.push_back(std::move(e));
  }
  const auto& events = j.at("events");
  if (!events.is_array()) throw SchemaMismatch("events", "expected an array");
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& je = events[i];
    const std::string path = index_path("events", i);
    if (!je.is_object()) throw SchemaMismatch(path, "expected an object");
    Event e;
    e.description = require_string(je, "description", path);
    if (je.contains("time") && !je.at("time").is_null()) {
      if (!je.at("time").is_string()) {
        throw SchemaMismatch(path + ".time", "expected a string");
      }
      e.time = je.at("time").get<std::string>();
    }
    if (je.contains("attributes")) {
      e.attributes = parse_attributes(je.at("attributes"), path + ".attributes");
    }
    g.events.push_back(std::move(e));
  }
  const auto& rels = j.at("relationships");
  if (!rels.is_array()) throw SchemaMismatch("relationships", "expected an array");
  for (std::size_t i = 0; i < rels.size(); ++i) {
    const auto& jr = rels[i];
    const std::string path = index_path("relationships", i);
    if (!jr.is_object()) throw SchemaMismatch(path, "expected an object");
    Relationship r;
    r.relation_type = require_string(jr, "type", path);
    r.source = require_string(jr, "source", path);
    r.target = require_string(jr, "target", path);
    g.relationships.push_back(std::move(r));
  }
  g.user_claims = parse_string_list(j.at("user_claims"), "user_claims");
  g.key_facts = parse_string_list(j.at("key_facts"), "key_facts");
  g.legal_questions = parse_string_list(j.at("legal_questions"), "legal_questions");
  return g;
}

// Strips the first Markdown code fence, if the text contains a complete
// one. The language tag after the opening fence is discarded with the rest
// of that line.
std::string_view strip_fence(std::string_view raw) {
  const std::size_t open = raw.find("```");
  if (open == std::string_view::npos) return raw;
  std::size_t body = raw.find('\n', open + 3);
  if (body == std::string_view::npos) return raw;
  ++body;
  const std::size_t close = raw.find("```", body);
  if (close == std::string_view::npos) return raw;
  return raw.substr(body, close - body);
}

// Returns the balanced {...} substring opening at `start`, honoring JSON
// string literals and escapes. Empty when the brace never closes.
std::string_view balanced_object(std::string_view text, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return text.substr(start, i - start + 1);
    }
  }
  return {};
}

}  // namespace

std::string ValidationReport::summary() const {
  if (violations.empty()) return "ok";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].code << " at " << violations[i].path;
  }
  return os.str();
}

ValidationReport validate_graph(const ElementGraph& g) {
  ValidationReport report;
  auto& out = report.violations;
  if (g.entities.empty()) {
    out.push_back({"empty-entities", "entities", "graph must contain at least one entity"});
  }
  std::set<std::string> names;
  for (std::size_t i = 0; i < g.entities.size(); ++i) {
    const std::string& name = g.entities[i].name;
    if (trim(name).empty()) {
      out.push_back({"empty-entity-name", index_path("entities", i, "name"),
                     "entity name must be non-empty"});
    } else if (!names.insert(name).second) {
      out.push_back({"duplicate-entity-name", index_path("entities", i, "name"),
                     "duplicate entity name: " + name});
    }
  }
  for (std::size_t i = 0; i < g.events.size(); ++i) {
    if (trim(g.events[i].description).empty()) {
      out.push_back({"empty-event-description",
                     index_path("events", i, "description"),
                     "event description must be non-empty"});
    }
  }
  for (std::size_t i = 0; i < g.relationships.size(); ++i) {
    const Relationship& r = g.relationships[i];
    if (trim(r.relation_type).empty()) {
      out.push_back({"empty-relation-type", index_path("relationships", i, "type"),
                     "relationship type must be non-empty"});
    }
    if (names.find(r.source) == names.end()) {
      out.push_back({"unresolved-endpoint", index_path("relationships", i, "source"),
                     "source does not name an entity: " + r.source});
    }
    if (names.find(r.target) == names.end()) {
      out.push_back({"unresolved-endpoint", index_path("relationships", i, "target"),
                     "target does not name an entity: " + r.target});
    }
  }
  check_text_list(g.user_claims, "user_claims", "empty-claim", out);
  check_text_list(g.key_facts, "key_facts", "empty-fact", out);
  check_text_list(g.legal_questions, "legal_questions", "empty-question", out);
  return report;
}

std::string serialize_graph(const ElementGraph& g) {
  ValidationReport report = validate_graph(g);
  if (!report.ok()) throw InvalidGraph(std::move(report));
  return graph_to_json(g).dump();
}

ElementGraph parse_graph(const std::string& raw) {
  const std::string_view stripped = strip_fence(raw);
  // Scan successive '{' positions until one yields parseable JSON; a chat
  // reply may use braces casually before the structured payload.
  std::size_t from = 0;
  ordered_json parsed;
  bool found = false;
  while (!found) {
    const std::size_t start = stripped.find('{', from);
    if (start == std::string_view::npos) break;
    const std::string_view candidate = balanced_object(stripped, start);
    if (!candidate.empty()) {
      parsed = ordered_json::parse(candidate, nullptr, /*allow_exceptions=*/false);
      if (!parsed.is_discarded()) found = true;
    }
    from = start + 1;
  }
  if (!found) throw NoStructuredPayload();
  ElementGraph g = graph_from_json(parsed);
  ValidationReport report = validate_graph(g);
  if (!report.ok()) throw InvariantViolation(std::move(report));
  return g;
}

EncodedPrompt encode_prompt(const ElementGraph& g, const ConsultationQuery& q) {
  if (trim(q.text).empty()) throw EmptyQuery();
  EncodedPrompt p;
  p.graph_section = serialize_graph(g);
  p.query_section = q.text;
  p.separator = kPromptSeparator;
  p.full_text = p.graph_section + p.separator + p.query_section;
  return p;
}

std::string render_opinion(const LegalOpinion& opinion) {
  std::ostringstream os;
  os << "Response\n--------\n" << opinion.response << "\n\n";
  os << "Legal Basis\n-----------\n";
  if (opinion.legal_basis.empty()) {
    os << "(none)\n";
    return os.str();
  }
  for (std::size_t i = 0; i < opinion.legal_basis.size(); ++i) {
    const StatuteCitation& c = opinion.legal_basis[i];
    os << '[' << (i + 1) << ']';
    if (!c.law_name.empty()) os << ' ' << c.law_name;
    if (!c.article_id.empty()) os << ' ' << c.article_id;
    os << '\n';
    if (!c.text.empty()) {
      for (const std::string& line : split_lines(c.text)) {
        os << "    " << line << '\n';
      }
    }
  }
  return os.str();
}

}  // namespace counsel
