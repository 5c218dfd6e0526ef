#include "counsel/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <utility>
#include <vector>

#include "counsel/text.hpp"
#include "json.hpp"

namespace counsel {

namespace {

constexpr double kBleuEpsilon = 1e-9;

// n-gram key: tokens joined on an unprintable separator.
std::string ngram_key(const std::vector<std::string>& tokens, std::size_t i, int n) {
  std::string key = tokens[i];
  for (int k = 1; k < n; ++k) {
    key.push_back('\x1f');
    key.append(tokens[i + k]);
  }
  return key;
}

std::unordered_map<std::string, std::size_t> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::unordered_map<std::string, std::size_t> counts;
  if (tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[ngram_key(tokens, i, n)];
  }
  return counts;
}

std::size_t clipped_matches(const std::vector<std::string>& cand,
                            const std::vector<std::string>& ref, int n) {
  const auto cand_counts = ngram_counts(cand, n);
  const auto ref_counts = ngram_counts(ref, n);
  std::size_t matched = 0;
  for (const auto& [gram, count] : cand_counts) {
    const auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) matched += std::min(count, it->second);
  }
  return matched;
}

MetricScore from_counts(std::size_t matched, std::size_t cand_total,
                        std::size_t ref_total) {
  MetricScore s;
  if (cand_total == 0 || ref_total == 0) return s;
  s.precision = static_cast<double>(matched) / static_cast<double>(cand_total);
  s.recall = static_cast<double>(matched) / static_cast<double>(ref_total);
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

double mean(const std::vector<InstanceScores>& xs, double (*pick)(const InstanceScores&)) {
  double sum = 0.0;
  for (const auto& x : xs) sum += pick(x);
  return sum / static_cast<double>(xs.size());
}

double pct(double v) { return v * 100.0; }

}  // namespace

std::vector<std::string> metric_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for (const TextRun& run : segment_runs(text)) {
    if (run.cjk) {
      for (const std::string& ch : run.units) tokens.push_back(ch);
    } else {
      tokens.push_back(run.units.front());
    }
  }
  return tokens;
}

MetricScore rouge_n(std::string_view candidate, std::string_view reference, int n) {
  if (n < 1) throw Error("bad-argument", "rouge_n requires n >= 1");
  const auto cand = metric_tokenize(candidate);
  const auto ref = metric_tokenize(reference);
  const std::size_t cand_total =
      cand.size() >= static_cast<std::size_t>(n) ? cand.size() - n + 1 : 0;
  const std::size_t ref_total =
      ref.size() >= static_cast<std::size_t>(n) ? ref.size() - n + 1 : 0;
  return from_counts(clipped_matches(cand, ref, n), cand_total, ref_total);
}

MetricScore rouge_l(std::string_view candidate, std::string_view reference) {
  const auto cand = metric_tokenize(candidate);
  const auto ref = metric_tokenize(reference);
  if (cand.empty() || ref.empty()) return {};
  // Two-row LCS table.
  std::vector<std::size_t> prev(ref.size() + 1, 0);
  std::vector<std::size_t> cur(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= cand.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      if (cand[i - 1] == ref[j - 1]) {
        cur[j] = prev[j - 1] + 1;
      } else {
        cur[j] = std::max(prev[j], cur[j - 1]);
      }
    }
    std::swap(prev, cur);
  }
  return from_counts(prev[ref.size()], cand.size(), ref.size());
}

double bleu(std::string_view candidate, std::string_view reference, int max_n) {
  if (max_n < 1) throw Error("bad-argument", "bleu requires max_n >= 1");
  const auto cand = metric_tokenize(candidate);
  const auto ref = metric_tokenize(reference);
  if (cand.empty() || ref.empty()) return 0.0;

  std::vector<double> precisions;
  for (int n = 1; n <= max_n; ++n) {
    const std::size_t total =
        cand.size() >= static_cast<std::size_t>(n) ? cand.size() - n + 1 : 0;
    if (total == 0) {
      precisions.push_back(0.0);
      continue;
    }
    precisions.push_back(static_cast<double>(clipped_matches(cand, ref, n)) /
                         static_cast<double>(total));
  }
  if (precisions[0] == 0.0) return 0.0;

  const double bp =
      cand.size() >= ref.size()
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref.size()) /
                               static_cast<double>(cand.size()));
  if (max_n == 1) return bp * precisions[0];

  double log_sum = 0.0;
  for (double p : precisions) {
    log_sum += std::log(p > 0.0 ? p : kBleuEpsilon);
  }
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

EvalReport evaluate_corpus(
    const std::vector<std::pair<std::string, std::string>>& pairs, int bleu_n) {
  if (pairs.empty()) throw EmptyCorpus("no prediction/reference pairs to score");
  if (bleu_n < 1) throw Error("bad-argument", "bleu order must be >= 1");
  EvalReport report;
  report.bleu_n = bleu_n;
  for (const auto& [prediction, reference] : pairs) {
    InstanceScores s;
    s.rouge1 = rouge_n(prediction, reference, 1);
    s.rouge2 = rouge_n(prediction, reference, 2);
    s.rouge_l = rouge_l(prediction, reference);
    s.bleu1 = bleu(prediction, reference, 1);
    s.bleu2 = bleu(prediction, reference, 2);
    s.bleu_n = bleu(prediction, reference, bleu_n);
    report.instances.push_back(s);
  }
  auto& m = report.macro;
  const auto& xs = report.instances;
  m.rouge1.precision = mean(xs, [](const InstanceScores& x) { return x.rouge1.precision; });
  m.rouge1.recall = mean(xs, [](const InstanceScores& x) { return x.rouge1.recall; });
  m.rouge1.f1 = mean(xs, [](const InstanceScores& x) { return x.rouge1.f1; });
  m.rouge2.precision = mean(xs, [](const InstanceScores& x) { return x.rouge2.precision; });
  m.rouge2.recall = mean(xs, [](const InstanceScores& x) { return x.rouge2.recall; });
  m.rouge2.f1 = mean(xs, [](const InstanceScores& x) { return x.rouge2.f1; });
  m.rouge_l.precision = mean(xs, [](const InstanceScores& x) { return x.rouge_l.precision; });
  m.rouge_l.recall = mean(xs, [](const InstanceScores& x) { return x.rouge_l.recall; });
  m.rouge_l.f1 = mean(xs, [](const InstanceScores& x) { return x.rouge_l.f1; });
  m.bleu1 = mean(xs, [](const InstanceScores& x) { return x.bleu1; });
  m.bleu2 = mean(xs, [](const InstanceScores& x) { return x.bleu2; });
  m.bleu_n = mean(xs, [](const InstanceScores& x) { return x.bleu_n; });
  return report;
}

std::string render_eval_table(const EvalReport& report) {
  const auto& m = report.macro;
  std::vector<std::pair<std::string, double>> columns = {
      {"Rouge-1", pct(m.rouge1.f1)},
      {"Rouge-2", pct(m.rouge2.f1)},
      {"Rouge-L", pct(m.rouge_l.f1)},
      {"Bleu-1", pct(m.bleu1)},
  };
  if (report.bleu_n >= 2) columns.emplace_back("Bleu-2", pct(m.bleu2));
  if (report.bleu_n > 2) {
    columns.emplace_back("Bleu-" + std::to_string(report.bleu_n), pct(m.bleu_n));
  }
  std::ostringstream os;
  os << "Count: " << report.instances.size() << '\n';
  char cell[32];
  os << std::left << std::setw(10) << "";
  for (const auto& [label, value] : columns) {
    (void)value;
    std::snprintf(cell, sizeof(cell), " %8s", label.c_str());
    os << cell;
  }
  os << '\n' << std::left << std::setw(10) << "Macro (%)";
  for (const auto& [label, value] : columns) {
    (void)label;
    std::snprintf(cell, sizeof(cell), " %8.2f", value);
    os << cell;
  }
  os << '\n';
  return os.str();
}

std::string eval_report_json(const EvalReport& report) {
  using json = nlohmann::ordered_json;
  const auto score_json = [](const MetricScore& s) {
    return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  };
  const auto instance_json = [&](const InstanceScores& s) {
    return json{{"rouge1", score_json(s.rouge1)},
                {"rouge2", score_json(s.rouge2)},
                {"rougeL", score_json(s.rouge_l)},
                {"bleu1", s.bleu1},
                {"bleu2", s.bleu2},
                {"bleuN", s.bleu_n}};
  };
  json j;
  j["schema_version"] = 1;
  j["count"] = report.instances.size();
  j["bleu_n"] = report.bleu_n;
  j["macro"] = instance_json(report.macro);
  j["instances"] = json::array();
  for (const auto& s : report.instances) j["instances"].push_back(instance_json(s));
  // Reserved for scores computed by external systems (e.g. human or
  // model-based ratings) merged into the same report downstream.
  j["external"] = json::object();
  return j.dump(2);
}

}  // namespace counsel
