#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "counsel/errors.hpp"

namespace counsel {

struct MetricScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  bool operator==(const MetricScore&) const = default;
};

// Evaluation tokenizer: CJK characters as single-character tokens, ASCII
// alphanumeric runs as lowercased words, everything else dropped. Unlike
// the retrieval tokenizer this emits no character bigrams.
std::vector<std::string> metric_tokenize(std::string_view text);

// Clipped n-gram overlap. Precision is clipped matches over candidate
// n-gram count, recall over reference n-gram count, f1 their harmonic
// mean. A side with no n-grams scores zero everywhere. n >= 1 required.
MetricScore rouge_n(std::string_view candidate, std::string_view reference, int n);

// Longest-common-subsequence overlap via dynamic programming:
// precision = |LCS| / len(candidate), recall = |LCS| / len(reference).
MetricScore rouge_l(std::string_view candidate, std::string_view reference);

// BLEU with uniform weights 1/max_n, clipped modified precisions, and
// brevity penalty min(1, exp(1 - ref_len / cand_len)). A zero unigram
// precision (or an empty side) scores exactly 0. Zero higher-order
// precisions are floored at 1e-9 before the log; nothing else is smoothed.
double bleu(std::string_view candidate, std::string_view reference, int max_n);

struct InstanceScores {
  MetricScore rouge1;
  MetricScore rouge2;
  MetricScore rouge_l;
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double bleu_n = 0.0;
};

struct EvalReport {
  std::vector<InstanceScores> instances;
  InstanceScores macro;  // arithmetic mean of every field over instances
  int bleu_n = 4;
};

// Scores each (prediction, reference) pair and macro-averages.
// Throws EmptyCorpus when `pairs` is empty.
EvalReport evaluate_corpus(
    const std::vector<std::pair<std::string, std::string>>& pairs, int bleu_n = 4);

// Fixed-width table of the macro averages as percentages with two
// decimals; the last column is labeled with the configured BLEU order.
std::string render_eval_table(const EvalReport& report);

// JSON report with raw scores plus an empty `external` object reserved for
// scores produced outside this library.
std::string eval_report_json(const EvalReport& report);

}  // namespace counsel
