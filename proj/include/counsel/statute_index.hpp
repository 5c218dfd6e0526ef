#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "counsel/errors.hpp"

namespace counsel {

struct Statute {
  std::string law_name;
  std::string article_id;  // e.g. "第133条之一"
  std::string text;

  bool operator==(const Statute&) const = default;
};

struct SearchHit {
  Statute statute;
  double score = 0.0;

  bool operator==(const SearchHit&) const = default;
};

struct Posting {
  std::uint32_t doc_id;
  std::uint32_t term_freq;

  bool operator==(const Posting&) const = default;
};

// A statute citation found in free text. `begin`/`end` are byte offsets of
// the mention span; `resolved` is filled in by verify_citations.
struct CitationMention {
  std::string law_name;   // empty for a bare article mention with no context
  std::string article_id;
  std::size_t begin = 0;
  std::size_t end = 0;
  bool resolved = false;

  bool operator==(const CitationMention&) const = default;
};

struct DuplicateStatute : Error {
  explicit DuplicateStatute(const std::string& key)
      : Error("duplicate-statute", "duplicate statute: " + key) {}
};

struct NotFound : Error {
  explicit NotFound(const std::string& key)
      : Error("not-found", "statute not found: " + key) {}
};

// Mixed-script tokenizer used for indexing and search. CJK characters
// (unified ideograph blocks) yield one token per character plus one token
// per adjacent character pair within each punctuation-free run; ASCII
// alphanumeric runs yield a single lowercased token; everything else is a
// separator and is dropped.
std::vector<std::string> tokenize(std::string_view text);

// BM25 index over a statute corpus. A document's indexed content is its
// law name, article id, and text joined by single spaces, so searches can
// match on any of the three. Immutable after build; documents keep corpus
// order and are identified by position.
class StatuteIndex {
 public:
  StatuteIndex() = default;

  // Rejects empty corpora and duplicate (law_name, article_id) pairs.
  static StatuteIndex build(std::vector<Statute> corpus, double k1 = 1.2,
                            double b = 0.75);

  // BM25 ranking: score(d) = sum over query token occurrences t of
  //   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len_d / avg_len)),
  //   idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1).
  // Only documents with score > 0 are returned, sorted by descending score
  // with ties broken by ascending (law_name, article_id).
  // Throws EmptyQuery when the query yields no tokens.
  std::vector<SearchHit> search(std::string_view query, std::size_t k) const;

  // Exact lookup; throws NotFound.
  const Statute& lookup(const std::string& law_name,
                        const std::string& article_id) const;

  // Normalized lookup for citation resolution: law names are compared
  // after stripping 《》 brackets and a leading 中华人民共和国. A mention
  // with an empty law name resolves only when the article id is unique in
  // the corpus. Returns nullptr when nothing (or more than one candidate
  // for the empty-law case) matches.
  const Statute* resolve(const std::string& law_name,
                         const std::string& article_id) const;

  std::size_t size() const { return docs_.size(); }
  const Statute& at(std::size_t doc_id) const { return docs_.at(doc_id); }
  std::uint32_t doc_length(std::size_t doc_id) const { return doc_lengths_.at(doc_id); }
  double avg_doc_length() const { return avg_doc_length_; }
  double k1() const { return k1_; }
  double b() const { return b_; }
  const std::map<std::string, std::vector<Posting>>& postings() const {
    return postings_;
  }

  // Versioned little-endian binary image. Building the same corpus twice
  // and saving produces byte-identical files.
  void save(const std::filesystem::path& path) const;
  static StatuteIndex load(const std::filesystem::path& path);

 private:
  std::vector<Statute> docs_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  double k1_ = 1.2;
  double b_ = 0.75;
  std::map<std::string, std::vector<Posting>> postings_;
  std::map<std::pair<std::string, std::string>, std::uint32_t> by_key_;
  std::map<std::string, std::vector<std::uint32_t>> by_article_;
  std::map<std::pair<std::string, std::string>, std::uint32_t> by_norm_key_;

  void finish_build();
};

// Reads a JSONL corpus with keys law_name / article_id / text.
// Throws ParseError (bad line) or Error("io", ...) on unreadable files.
std::vector<Statute> load_corpus(const std::filesystem::path& path);

// Finds statute citations in free text, in order of appearance:
//   - 《law》第N条[之M]   (law taken from the bracketed name)
//   - bare 第N条[之M]     (law taken from the nearest preceding 《...》, if any)
//   - Article N of [the] <law>   (English form)
// Article numbers may use ASCII digits or Chinese numerals.
std::vector<CitationMention> extract_citations(std::string_view text);

// extract_citations plus resolution against an index (see resolve()).
std::vector<CitationMention> verify_citations(std::string_view text,
                                              const StatuteIndex& index);

// Law-name normalization used by resolve()/verify_citations.
std::string normalize_law_name(std::string_view name);

}  // namespace counsel
