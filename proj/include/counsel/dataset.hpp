#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "counsel/core_types.hpp"
#include "counsel/errors.hpp"
#include "counsel/llm_backend.hpp"
#include "counsel/prompts.hpp"
#include "counsel/statute_index.hpp"

namespace counsel {

enum class Split { train, val, test };

const char* to_string(Split split);

// One preference example: a query with a preferred and a rejected answer.
struct Triplet {
  std::string id;
  std::string query;
  std::string positive;
  std::string negative;
  Split split = Split::train;

  bool operator==(const Triplet&) const = default;
};

// Reads a JSONL file with keys id/query/positive/negative/split.
// Throws ParseError (malformed JSON) or InvariantViolation(line, code) for
// schema problems: missing fields, empty texts, positive == negative, or
// an unknown split value.
std::vector<Triplet> load_triplets(const std::filesystem::path& path);

struct SplitStats {
  std::size_t pairs = 0;
  double mean_query_len = 0.0;     // metric_tokenize token counts
  double mean_positive_len = 0.0;
  double mean_negative_len = 0.0;
};

struct EmptySplit : Error {
  explicit EmptySplit(const std::string& m = "dataset contains no records")
      : Error("empty-split", m) {}
};

// Per-split token-length statistics. Splits with no records are omitted.
std::map<Split, SplitStats> compute_stats(const std::vector<Triplet>& data);

std::string render_stats_table(const std::map<Split, SplitStats>& stats);

// --- preference-optimization arithmetic ---

struct NonpositiveBeta : Error {
  explicit NonpositiveBeta(const std::string& m = "beta must be positive")
      : Error("nonpositive-beta", m) {}
};

struct EmptyBatch : Error {
  explicit EmptyBatch(const std::string& m = "batch must be non-empty")
      : Error("empty-batch", m) {}
};

// Log-probabilities of the preferred and rejected answers under the policy
// being trained, already reduced by the reference policy if one is used.
struct DpoInputs {
  double logp_positive = 0.0;
  double logp_negative = 0.0;
  double beta = 0.1;
};

// delta = logp_positive - logp_negative.
double dpo_gap(const DpoInputs& inputs);

// sigmoid(beta * delta), computed without overflow for any finite delta.
double dpo_pref(double delta, double beta);

// Mean over the batch of -log sigmoid(beta * delta), evaluated as
// softplus(-beta * delta) for numerical stability. All betas must match.
double dpo_loss(const std::vector<DpoInputs>& batch);

// d loss / d delta for one example: -beta * sigmoid(-beta * delta).
double dpo_loss_grad(const DpoInputs& inputs);

// --- negative-example generation and review ---

struct NegativeReport {
  std::vector<std::string> violations;  // codes, e.g. "unresolved-citation:..."

  bool ok() const { return violations.empty(); }
};

struct NegativeResult {
  std::string text;
  NegativeReport report;  // empty for an accepted candidate
  int attempts = 1;
};

struct GenerationRejected : Error {
  GenerationRejected(std::vector<std::string> attempt_texts,
                     std::vector<NegativeReport> attempt_reports,
                     const std::string& why)
      : Error("generation-rejected", "negative generation rejected twice: " + why),
        attempts(std::move(attempt_texts)),
        reports(std::move(attempt_reports)) {}
  std::vector<std::string> attempts;
  std::vector<NegativeReport> reports;
};

// Checks one candidate negative: non-empty, distinct from the positive,
// every statute citation resolvable in the index, and token length within
// [0.3, 2.0] times the positive's. Returns the violations found.
NegativeReport check_negative(const std::string& candidate,
                              const std::string& positive,
                              const StatuteIndex& index);

// Asks the backend (role "negative_gen") for a flawed answer, validates
// it, and regenerates once with the violations quoted back. A second
// rejection raises GenerationRejected carrying both attempts.
NegativeResult generate_negative(const ConsultationQuery& query,
                                 const std::string& positive,
                                 ChatBackend& backend, const StatuteIndex& index,
                                 const PromptSet& prompts = PromptSet::builtin());

struct FlagReport {
  bool suspect = false;
  std::vector<std::string> reasons;
  std::string suggested_revision;
  std::string raw_text;
};

// Asks the backend (role "flag") to review a reference answer. The reply
// grammar is OK (not suspect) or FLAG: <reasons> [SUGGEST: <revision>].
// Replies matching neither are reported suspect with reason
// "parse-failure" rather than trusted.
FlagReport flag_suspect(const ConsultationQuery& query,
                        const std::string& reference, ChatBackend& backend,
                        const PromptSet& prompts = PromptSet::builtin());

}  // namespace counsel
