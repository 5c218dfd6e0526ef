#include "counsel/agents.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <set>

#include "counsel/text.hpp"

namespace counsel {

namespace {

class StepClock {
 public:
  StepClock() : t0_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

std::string call_backend(AgentContext& ctx, const char* role,
                         const std::vector<ChatMessage>& messages) {
  CallOptions opts;
  const auto it = ctx.options.find(role);
  if (it != ctx.options.end()) {
    opts.temperature = it->second.temperature;
    opts.max_tokens = it->second.max_tokens;
  }
  return ctx.backend.complete(role, messages, opts);
}

// Digests cover each operation's primary input and output texts; they let
// a replay detect divergence without storing full payloads.
void record_step(AgentContext& ctx, const char* role, std::string label,
                 std::string_view input, std::string_view output, double ms,
                 std::vector<std::string> warnings = {}) {
  if (!ctx.trace) return;
  ctx.trace->add_step(role, std::move(label), fnv1a64_hex(input),
                      fnv1a64_hex(output), ctx.freeze_time ? 0.0 : ms,
                      std::move(warnings));
}

bool consume_prefix(std::string& s, const char* prefix) {
  const std::size_t n = std::strlen(prefix);
  if (s.compare(0, n, prefix) == 0) {
    s = s.substr(n);
    return true;
  }
  return false;
}

// Strips one leading list marker: a bullet character or a (possibly
// parenthesized) number followed by . ) 、 ． ） or a closing paren.
std::string strip_list_marker(std::string_view line) {
  std::string s = trim(line);
  for (const char* bullet : {"-", "*", "\xE2\x80\xA2" /* • */,
                             "\xC2\xB7" /* · */, "\xE2\x97\x8F" /* ● */}) {
    std::string t = s;
    if (consume_prefix(t, bullet)) return trim(t);
  }
  std::string t = s;
  bool parenthesized = consume_prefix(t, "(") || consume_prefix(t, "\xEF\xBC\x88" /* （ */);
  std::size_t digits = 0;
  while (!t.empty() && t.front() >= '0' && t.front() <= '9') {
    t.erase(t.begin());
    ++digits;
  }
  if (digits == 0) return s;
  if (parenthesized) {
    if (consume_prefix(t, ")") || consume_prefix(t, "\xEF\xBC\x89" /* ） */)) {
      consume_prefix(t, ".");
      return trim(t);
    }
    return s;
  }
  for (const char* mark : {".", ")", "\xE3\x80\x81" /* 、 */,
                           "\xEF\xBC\x8E" /* ． */, "\xEF\xBC\x89" /* ） */}) {
    std::string u = t;
    if (consume_prefix(u, mark)) return trim(u);
  }
  return s;
}

std::vector<std::string> split_on_separators(const std::string& text,
                                             const std::vector<const char*>& seps) {
  std::vector<std::string> parts;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (const char* sep : seps) {
      const std::size_t n = std::strlen(sep);
      if (text.compare(i, n, sep) == 0) {
        parts.push_back(current);
        current.clear();
        i += n;
        matched = true;
        break;
      }
    }
    if (!matched) {
      current.push_back(text[i]);
      ++i;
    }
  }
  parts.push_back(current);
  return parts;
}

// Section heading labels; Chinese aliases are accepted because drafts are
// frequently written entirely in Chinese.
const std::vector<std::string>& response_labels() {
  static const std::vector<std::string> labels = {"response", "回复", "答复"};
  return labels;
}

const std::vector<std::string>& legal_basis_labels() {
  static const std::vector<std::string> labels = {"legal basis", "legal_basis",
                                                  "法律依据"};
  return labels;
}

// A heading is the label alone, or the label followed by a colon (ASCII or
// fullwidth) and optional inline content. Leading #/*/> decoration is
// ignored.
bool match_heading(const std::string& line, const std::vector<std::string>& labels,
                   std::string* inline_content) {
  std::string s = trim(line);
  while (!s.empty() && (s.front() == '#' || s.front() == '*' || s.front() == '>')) {
    s = trim(s.substr(1));
  }
  const std::string lower = ascii_lower(s);
  for (const std::string& label : labels) {
    if (lower.size() < label.size()) continue;
    if (lower.compare(0, label.size(), ascii_lower(label)) != 0) continue;
    std::string after = trim(s.substr(label.size()));
    while (!after.empty() && after.front() == '*') after = trim(after.substr(1));
    if (after.empty()) {
      inline_content->clear();
      return true;
    }
    if (after.front() == ':') {
      *inline_content = trim(after.substr(1));
      return true;
    }
    if (after.size() >= 3 && after.compare(0, 3, "\xEF\xBC\x9A" /* ： */) == 0) {
      *inline_content = trim(after.substr(3));
      return true;
    }
  }
  return false;
}

void scan_sections(std::string_view reply, std::optional<std::string>* response,
                   std::optional<std::string>* legal_basis) {
  enum class Section { none, response, legal_basis };
  Section current = Section::none;
  std::string resp_text;
  std::string legal_text;
  bool saw_response = false;
  bool saw_legal = false;
  for (const std::string& line : split_lines(reply)) {
    std::string inline_content;
    if (match_heading(line, response_labels(), &inline_content)) {
      current = Section::response;
      saw_response = true;
      if (!inline_content.empty()) resp_text += inline_content + "\n";
      continue;
    }
    if (match_heading(line, legal_basis_labels(), &inline_content)) {
      current = Section::legal_basis;
      saw_legal = true;
      if (!inline_content.empty()) legal_text += inline_content + "\n";
      continue;
    }
    if (current == Section::response) {
      resp_text += line + "\n";
    } else if (current == Section::legal_basis) {
      legal_text += line + "\n";
    }
  }
  if (saw_response) *response = trim(resp_text);
  if (saw_legal) *legal_basis = trim(legal_text);
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

const char* to_string(DecisionKind kind) {
  switch (kind) {
    case DecisionKind::Pass: return "Pass";
    case DecisionKind::FormatCheck: return "FormatCheck";
    case DecisionKind::LawSearch: return "LawSearch";
    case DecisionKind::Both: return "Both";
  }
  return "Pass";
}

std::optional<DecisionKind> detect_decision(std::string_view reply) {
  const bool format_check = icontains(reply, "formatcheckagent");
  const bool law_search = icontains(reply, "lawsearchagent");
  if (format_check && law_search) return DecisionKind::Both;
  if (format_check) return DecisionKind::FormatCheck;
  if (law_search) return DecisionKind::LawSearch;
  if (icontains(reply, "pass")) return DecisionKind::Pass;
  return std::nullopt;
}

std::vector<std::string> split_suggestions(std::string_view reply) {
  std::vector<std::string> items;
  for (const std::string& line : split_lines(reply)) {
    std::string item = strip_list_marker(line);
    if (!item.empty()) items.push_back(std::move(item));
  }
  return items;
}

std::vector<std::string> parse_search_terms(std::string_view reply,
                                            std::size_t max_terms) {
  static const std::vector<const char*> kSeparators = {
      ",", ";", "\xEF\xBC\x8C" /* ， */, "\xEF\xBC\x9B" /* ； */,
      "\xE3\x80\x81" /* 、 */};
  std::vector<std::string> terms;
  std::set<std::string> seen;
  for (const std::string& line : split_lines(reply)) {
    for (const std::string& piece :
         split_on_separators(strip_list_marker(line), kSeparators)) {
      const std::string term = trim(piece);
      if (term.empty() || !seen.insert(term).second) continue;
      terms.push_back(term);
      if (terms.size() == max_terms) return terms;
    }
  }
  return terms;
}

std::optional<OpinionSections> split_opinion_sections(std::string_view reply) {
  std::optional<std::string> response;
  std::optional<std::string> legal_basis;
  scan_sections(reply, &response, &legal_basis);
  if (!response || response->empty() || !legal_basis) return std::nullopt;
  return OpinionSections{*response, *legal_basis};
}

ElementGraph extract_elements(const ConsultationQuery& query, AgentContext& ctx) {
  if (trim(query.text).empty()) throw EmptyQuery();
  StepClock clock;
  std::vector<ChatMessage> messages{{MessageRole::system, ctx.prompts.element},
                                    {MessageRole::user, query.text}};
  const std::string first = call_backend(ctx, "element", messages);
  std::vector<std::string> warnings;
  try {
    ElementGraph g = parse_graph(first);
    record_step(ctx, "element", "extract", query.text, first, clock.ms());
    return g;
  } catch (const Error& e) {
    warnings.push_back(std::string("first extraction reply rejected: ") + e.code());
  }
  messages.push_back({MessageRole::assistant, first});
  messages.push_back(
      {MessageRole::user,
       "The previous reply could not be used. Respond with only a JSON object "
       "in exactly this shape:\n" +
           graph_schema_hint()});
  const std::string second = call_backend(ctx, "element", messages);
  try {
    ElementGraph g = parse_graph(second);
    record_step(ctx, "element", "extract", query.text, second, clock.ms(),
                std::move(warnings));
    return g;
  } catch (const Error& e) {
    warnings.push_back(std::string("second extraction reply rejected: ") + e.code());
    record_step(ctx, "element", "extract-failed", query.text, second, clock.ms(),
                std::move(warnings));
    throw ExtractionFailed(first, second, e.code());
  }
}

Draft draft_initial(const EncodedPrompt& prompt, AgentContext& ctx) {
  StepClock clock;
  const std::vector<ChatMessage> messages{{MessageRole::system, ctx.prompts.draft},
                                          {MessageRole::user, prompt.full_text}};
  const std::string reply = call_backend(ctx, "draft", messages);
  if (trim(reply).empty()) {
    record_step(ctx, "draft", "initial-failed", prompt.full_text, reply, clock.ms(),
                {"draft reply was empty"});
    throw EmptyDraft();
  }
  record_step(ctx, "draft", "initial", prompt.full_text, reply, clock.ms());
  Draft d;
  d.text = reply;
  d.iteration = 0;
  return d;
}

ManagerDecision manager_decide(const Draft& draft, AgentContext& ctx) {
  StepClock clock;
  std::vector<ChatMessage> messages{{MessageRole::system, ctx.prompts.manager},
                                    {MessageRole::user, draft.text}};
  std::string reply = call_backend(ctx, "manager", messages);
  std::vector<std::string> warnings;
  std::optional<DecisionKind> kind = detect_decision(reply);
  if (!kind) {
    warnings.push_back("manager reply had no decision token; retried");
    messages.push_back({MessageRole::assistant, reply});
    messages.push_back(
        {MessageRole::user,
         "Reply with exactly one of: Pass / Call: FormatCheckAgent / Call: "
         "LawSearchAgent / Call: FormatCheckAgent then LawSearchAgent"});
    reply = call_backend(ctx, "manager", messages);
    kind = detect_decision(reply);
    if (!kind) {
      warnings.push_back("manager retry still undecidable; defaulted to Pass");
      kind = DecisionKind::Pass;
    }
  }
  const ManagerDecision decision{*kind, reply};
  record_step(ctx, "manager", std::string("decision=") + to_string(decision.kind),
              draft.text, reply, clock.ms(), std::move(warnings));
  return decision;
}

Suggestions format_suggestions(const Draft& draft, AgentContext& ctx) {
  StepClock clock;
  const std::vector<ChatMessage> messages{
      {MessageRole::system, ctx.prompts.format_check},
      {MessageRole::user, draft.text}};
  const std::string reply = call_backend(ctx, "format_check", messages);
  std::vector<std::string> items = split_suggestions(reply);
  if (items.empty()) {
    record_step(ctx, "format_check", "no-suggestions", draft.text, reply,
                clock.ms(), {"format check reply contained no suggestions"});
    throw FormatCheckEmpty();
  }
  record_step(ctx, "format_check", "suggestions=" + std::to_string(items.size()),
              draft.text, reply, clock.ms());
  return {std::move(items), reply};
}

Draft apply_suggestions(const Draft& draft, const Suggestions& suggestions,
                        AgentContext& ctx) {
  if (trim(draft.text).empty()) throw EmptyDraft("cannot revise an empty draft");
  if (suggestions.items.empty()) {
    throw FormatCheckEmpty("no suggestions to apply");
  }
  StepClock clock;
  std::string list;
  for (const std::string& item : suggestions.items) list += "- " + item + "\n";
  const std::vector<ChatMessage> messages{
      {MessageRole::system, ctx.prompts.draft},
      {MessageRole::user, "Draft:\n" + draft.text + "\n\nEditing suggestions:\n" +
                              list +
                              "\nApply every suggestion without changing the "
                              "legal meaning. Reply with the revised draft "
                              "only."}};
  const std::string reply = call_backend(ctx, "draft", messages);
  if (trim(reply).empty()) {
    record_step(ctx, "apply", "revision-failed", draft.text, reply, clock.ms(),
                {"revision reply was empty"});
    throw EmptyDraft("revision reply was empty");
  }
  std::vector<std::string> warnings;
  if (reply == draft.text) warnings.push_back("revision left the draft unchanged");
  Draft out = draft;
  out.text = reply;
  out.applied_suggestions.insert(out.applied_suggestions.end(),
                                 suggestions.items.begin(), suggestions.items.end());
  record_step(ctx, "apply",
              "suggestions=" + std::to_string(suggestions.items.size()),
              draft.text, reply, clock.ms(), std::move(warnings));
  return out;
}

StatuteList law_search(const ConsultationQuery& query, const Draft& draft,
                       const StatuteIndex& index, std::size_t top_k,
                       AgentContext& ctx) {
  if (index.size() == 0) throw EmptyIndex();
  StepClock clock;
  const std::vector<ChatMessage> messages{
      {MessageRole::system, ctx.prompts.law_search},
      {MessageRole::user,
       "Question:\n" + query.text + "\n\nDraft:\n" + draft.text +
           "\n\nList up to 5 search terms for retrieving the governing "
           "provisions, one per line."}};
  const std::string reply = call_backend(ctx, "law_search", messages);
  std::vector<std::string> warnings;
  std::vector<std::string> terms = parse_search_terms(reply);
  if (terms.empty()) {
    warnings.push_back("no usable search terms; fell back to the raw query");
    terms.push_back(query.text);
  }
  std::map<std::pair<std::string, std::string>, SearchHit> best;
  for (const std::string& term : terms) {
    std::vector<SearchHit> hits;
    try {
      hits = index.search(term, top_k);
    } catch (const EmptyQuery&) {
      warnings.push_back("term yields no tokens: " + term);
      continue;
    }
    for (SearchHit& hit : hits) {
      const auto key = std::make_pair(hit.statute.law_name, hit.statute.article_id);
      const auto it = best.find(key);
      if (it == best.end() || hit.score > it->second.score) {
        best[key] = std::move(hit);
      }
    }
  }
  StatuteList out;
  out.query_terms = terms;
  for (auto& [key, hit] : best) out.items.push_back(std::move(hit));
  std::sort(out.items.begin(), out.items.end(),
            [](const SearchHit& a, const SearchHit& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.statute.law_name != b.statute.law_name) {
                return a.statute.law_name < b.statute.law_name;
              }
              return a.statute.article_id < b.statute.article_id;
            });
  if (out.items.size() > top_k) out.items.resize(top_k);
  std::string hits_digest_src;
  for (const SearchHit& hit : out.items) {
    hits_digest_src += hit.statute.law_name + "#" + hit.statute.article_id + "\n";
  }
  record_step(ctx, "law_search", "terms=" + join(terms, "|"),
              query.text + "\n" + draft.text, hits_digest_src, clock.ms(),
              std::move(warnings));
  return out;
}

Draft integrate_statutes(const Draft& draft, const StatuteList& statutes,
                         AgentContext& ctx) {
  if (statutes.items.empty()) {
    throw Error("empty-statute-list", "no retrieved provisions to integrate");
  }
  StepClock clock;
  std::string block;
  for (const SearchHit& hit : statutes.items) {
    block += "\xE3\x80\x8A" + hit.statute.law_name + "\xE3\x80\x8B" +
             hit.statute.article_id + "\n" + hit.statute.text + "\n";
  }
  const std::vector<ChatMessage> messages{
      {MessageRole::system, ctx.prompts.draft},
      {MessageRole::user, "Draft:\n" + draft.text + "\n\nProvisions:\n" + block +
                              "\nRevise the draft so it cites and applies "
                              "these provisions. Reply with the revised draft "
                              "only."}};
  const std::string reply = call_backend(ctx, "draft", messages);
  if (trim(reply).empty()) {
    record_step(ctx, "integrate", "integration-failed", draft.text, reply,
                clock.ms(), {"integration reply was empty"});
    throw EmptyDraft("integration reply was empty");
  }
  Draft out = draft;
  out.text = reply;
  for (const SearchHit& hit : statutes.items) {
    const std::string key = hit.statute.law_name + "#" + hit.statute.article_id;
    if (std::find(out.integrated_statute_ids.begin(),
                  out.integrated_statute_ids.end(),
                  key) == out.integrated_statute_ids.end()) {
      out.integrated_statute_ids.push_back(key);
    }
  }
  record_step(ctx, "integrate",
              "statutes=" + std::to_string(statutes.items.size()), draft.text,
              reply, clock.ms());
  return out;
}

LegalOpinion content_check(const ConsultationQuery& query, const Draft& draft,
                           const StatuteIndex* index, AgentContext& ctx) {
  StepClock clock;
  std::vector<ChatMessage> messages{
      {MessageRole::system, ctx.prompts.content_check},
      {MessageRole::user,
       "Question:\n" + query.text + "\n\nDraft:\n" + draft.text +
           "\n\nProduce the final opinion as exactly two labeled sections:\n"
           "Response: <the answer>\n"
           "Legal Basis: <the provisions it relies on, one per line>"}};
  std::string reply = call_backend(ctx, "content_check", messages);
  std::vector<std::string> warnings;
  std::optional<std::string> response;
  std::optional<std::string> legal_basis;
  scan_sections(reply, &response, &legal_basis);
  if (!response || response->empty() || !legal_basis) {
    warnings.push_back("final opinion sections missing; retried");
    messages.push_back({MessageRole::assistant, reply});
    messages.push_back(
        {MessageRole::user,
         "The reply must contain both sections. Repeat it as:\nResponse: "
         "...\nLegal Basis: ..."});
    reply = call_backend(ctx, "content_check", messages);
    response.reset();
    legal_basis.reset();
    scan_sections(reply, &response, &legal_basis);
    if (!response || response->empty() || !legal_basis) {
      const std::string which =
          (!response || response->empty()) ? "response" : "legal_basis";
      record_step(ctx, "content_check", "sections-missing", draft.text, reply,
                  clock.ms(), std::move(warnings));
      throw SectionMissing(which);
    }
  }

  LegalOpinion opinion;
  opinion.response = *response;
  opinion.source_query_id = query.id;
  const std::string& basis_text = *legal_basis;
  const std::vector<CitationMention> mentions = extract_citations(basis_text);
  if (mentions.empty()) {
    if (!trim(basis_text).empty()) {
      // Free-form basis with no recognizable citation: keep it verbatim.
      opinion.legal_basis.push_back({"", "", trim(basis_text)});
    }
  } else {
    for (std::size_t i = 0; i < mentions.size(); ++i) {
      const CitationMention& m = mentions[i];
      const std::size_t slice_end =
          (i + 1 < mentions.size()) ? mentions[i + 1].begin : basis_text.size();
      const std::string slice =
          trim(basis_text.substr(m.end, slice_end - m.end));
      StatuteCitation citation;
      const Statute* statute =
          index ? index->resolve(m.law_name, m.article_id) : nullptr;
      if (statute != nullptr) {
        citation.law_name = statute->law_name;
        citation.article_id = statute->article_id;
        citation.text = statute->text;
      } else {
        citation.law_name = m.law_name;
        citation.article_id = m.article_id;
        citation.text =
            !slice.empty() ? slice
                           : std::string(basis_text.substr(m.begin, m.end - m.begin));
      }
      opinion.legal_basis.push_back(std::move(citation));
    }
  }
  record_step(ctx, "content_check",
              "citations=" + std::to_string(opinion.legal_basis.size()),
              draft.text, reply, clock.ms(), std::move(warnings));
  return opinion;
}

}  // namespace counsel
