#include "counsel/dataset.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "counsel/metrics.hpp"
#include "counsel/text.hpp"
#include "json.hpp"

namespace counsel {

namespace {

// sigmoid without overflow: never exponentiates a positive argument.
double stable_sigmoid(double z) {
  if (z >= 0.0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// softplus(x) = log(1 + e^x), rearranged so the exponent is never positive.
double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

Split split_from_string(const std::string& s, std::size_t line) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw InvariantViolation(line, "unknown-split:" + s);
}

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

std::vector<Triplet> load_triplets(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot read triplet file: " + path.string());
  std::vector<Triplet> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(lineno, "malformed JSON");
    Triplet t;
    for (const char* key : {"id", "query", "positive", "negative", "split"}) {
      if (!j.contains(key) || !j.at(key).is_string()) {
        throw InvariantViolation(lineno, std::string("missing-field:") + key);
      }
    }
    t.id = j.at("id").get<std::string>();
    t.query = j.at("query").get<std::string>();
    t.positive = j.at("positive").get<std::string>();
    t.negative = j.at("negative").get<std::string>();
    t.split = split_from_string(j.at("split").get<std::string>(), lineno);
    if (trim(t.id).empty()) throw InvariantViolation(lineno, "empty-id");
    if (trim(t.query).empty()) throw InvariantViolation(lineno, "empty-query");
    if (trim(t.positive).empty()) throw InvariantViolation(lineno, "empty-positive");
    if (trim(t.negative).empty()) throw InvariantViolation(lineno, "empty-negative");
    if (t.positive == t.negative) {
      throw InvariantViolation(lineno, "positive-equals-negative");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::map<Split, SplitStats> compute_stats(const std::vector<Triplet>& data) {
  if (data.empty()) throw EmptySplit();
  std::map<Split, SplitStats> stats;
  std::map<Split, std::array<double, 3>> sums;
  for (const Triplet& t : data) {
    SplitStats& s = stats[t.split];
    ++s.pairs;
    auto& sum = sums[t.split];
    sum[0] += static_cast<double>(metric_tokenize(t.query).size());
    sum[1] += static_cast<double>(metric_tokenize(t.positive).size());
    sum[2] += static_cast<double>(metric_tokenize(t.negative).size());
  }
  for (auto& [split, s] : stats) {
    const auto& sum = sums[split];
    const double n = static_cast<double>(s.pairs);
    s.mean_query_len = sum[0] / n;
    s.mean_positive_len = sum[1] / n;
    s.mean_negative_len = sum[2] / n;
  }
  return stats;
}

std::string render_stats_table(const std::map<Split, SplitStats>& stats) {
  std::ostringstream os;
  char header[128];
  std::snprintf(header, sizeof(header), "%-10s %10s %10s %21s\n", "Dataset",
                "QA Pairs", "QLength", "ALength (Pos./Neg.)");
  os << header;
  for (Split split : {Split::train, Split::val, Split::test}) {
    const auto it = stats.find(split);
    if (it == stats.end()) continue;
    const SplitStats& s = it->second;
    const std::string label = std::string("# ") + to_string(split);
    const std::string lengths = format_double(s.mean_positive_len, 1) + " / " +
                                format_double(s.mean_negative_len, 1);
    char row[160];
    std::snprintf(row, sizeof(row), "%-10s %10s %10s %21s\n", label.c_str(),
                  format_thousands(s.pairs).c_str(),
                  format_double(s.mean_query_len, 2).c_str(), lengths.c_str());
    os << row;
  }
  return os.str();
}

double dpo_gap(const DpoInputs& inputs) {
  return inputs.logp_positive - inputs.logp_negative;
}

double dpo_pref(double delta, double beta) {
  if (beta <= 0.0) throw NonpositiveBeta();
  return stable_sigmoid(beta * delta);
}

double dpo_loss(const std::vector<DpoInputs>& batch) {
  if (batch.empty()) throw EmptyBatch();
  const double beta = batch.front().beta;
  double sum = 0.0;
  for (const DpoInputs& x : batch) {
    if (x.beta <= 0.0) throw NonpositiveBeta();
    if (x.beta != beta) {
      throw Error("mixed-beta", "all examples in a batch must share one beta");
    }
    // -log sigmoid(beta * delta) == softplus(-beta * delta)
    sum += softplus(-beta * dpo_gap(x));
  }
  return sum / static_cast<double>(batch.size());
}

double dpo_loss_grad(const DpoInputs& inputs) {
  if (inputs.beta <= 0.0) throw NonpositiveBeta();
  return -inputs.beta * stable_sigmoid(-inputs.beta * dpo_gap(inputs));
}

NegativeReport check_negative(const std::string& candidate,
                              const std::string& positive,
                              const StatuteIndex& index) {
  NegativeReport report;
  if (trim(candidate).empty()) {
    report.violations.push_back("empty-output");
    return report;
  }
  if (candidate == positive) report.violations.push_back("duplicate-of-positive");
  for (const CitationMention& m : verify_citations(candidate, index)) {
    if (!m.resolved) {
      report.violations.push_back("unresolved-citation:" + m.law_name +
                                  m.article_id);
    }
  }
  const double positive_len =
      static_cast<double>(metric_tokenize(positive).size());
  const double candidate_len =
      static_cast<double>(metric_tokenize(candidate).size());
  if (candidate_len < 0.3 * positive_len) {
    report.violations.push_back("length-below-band");
  } else if (candidate_len > 2.0 * positive_len) {
    report.violations.push_back("length-above-band");
  }
  return report;
}

NegativeResult generate_negative(const ConsultationQuery& query,
                                 const std::string& positive,
                                 ChatBackend& backend, const StatuteIndex& index,
                                 const PromptSet& prompts) {
  if (trim(query.text).empty()) throw EmptyQuery();
  std::vector<ChatMessage> messages{
      {MessageRole::system, prompts.negative_gen},
      {MessageRole::user,
       "Question:\n" + query.text + "\n\nReference answer:\n" + positive}};
  const std::string first = backend.complete("negative_gen", messages);
  NegativeReport first_report = check_negative(first, positive, index);
  if (first_report.ok()) return {first, {}, 1};

  std::string issues;
  for (const std::string& v : first_report.violations) issues += "- " + v + "\n";
  messages.push_back({MessageRole::assistant, first});
  messages.push_back(
      {MessageRole::user,
       "That candidate was rejected for these reasons:\n" + issues +
           "Generate a new flawed response that avoids every listed "
           "problem. Cite only provisions that actually exist."});
  const std::string second = backend.complete("negative_gen", messages);
  NegativeReport second_report = check_negative(second, positive, index);
  if (second_report.ok()) return {second, {}, 2};

  const std::string why = second_report.violations.empty()
                              ? "unknown"
                              : second_report.violations.front();
  throw GenerationRejected({first, second},
                           {std::move(first_report), std::move(second_report)},
                           why);
}

FlagReport flag_suspect(const ConsultationQuery& query,
                        const std::string& reference, ChatBackend& backend,
                        const PromptSet& prompts) {
  const std::vector<ChatMessage> messages{
      {MessageRole::system, prompts.flag},
      {MessageRole::user,
       "Question:\n" + query.text + "\n\nReference answer:\n" + reference}};
  const std::string reply = backend.complete("flag", messages);
  FlagReport report;
  report.raw_text = reply;
  const std::string trimmed = trim(reply);
  const std::string lower = ascii_lower(trimmed);
  if (lower == "ok" ||
      (lower.rfind("ok", 0) == 0 &&
       (trimmed.size() == 2 || !is_ascii_alnum(static_cast<unsigned char>(trimmed[2]))))) {
    report.suspect = false;
    return report;
  }
  report.suspect = true;
  const std::size_t flag_pos = lower.find("flag:");
  if (flag_pos == std::string::npos) {
    report.reasons.push_back("parse-failure");
    return report;
  }
  const std::size_t suggest_pos = lower.find("suggest:", flag_pos);
  const std::size_t reasons_begin = flag_pos + 5;
  const std::size_t reasons_end =
      suggest_pos == std::string::npos ? trimmed.size() : suggest_pos;
  const std::string reasons_text =
      trimmed.substr(reasons_begin, reasons_end - reasons_begin);
  std::string current;
  const auto flush = [&] {
    const std::string reason = trim(current);
    if (!reason.empty()) report.reasons.push_back(reason);
    current.clear();
  };
  for (char c : reasons_text) {
    if (c == ';' || c == '\n') {
      flush();
    } else {
      current.push_back(c);
    }
  }
  flush();
  if (suggest_pos != std::string::npos) {
    report.suggested_revision = trim(trimmed.substr(suggest_pos + 8));
  }
  if (report.reasons.empty()) report.reasons.push_back("parse-failure");
  return report;
}

}  // namespace counsel
