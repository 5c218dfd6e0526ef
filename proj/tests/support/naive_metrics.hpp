// Independent reference implementations used to cross-check the metric
// code. Everything here favors obvious correctness over speed: a separate
// UTF-8 walk, map-based n-gram counting, and a full-matrix LCS.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace naive {

// Decodes one UTF-8 scalar starting at i; returns its value and advances
// i. Malformed bytes decode as U+FFFD one byte at a time.
inline char32_t decode_one(std::string_view s, std::size_t& i) {
  const unsigned char b0 = static_cast<unsigned char>(s[i]);
  std::size_t len = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    cp = b0;
    len = 1;
  } else if ((b0 >> 5) == 0x6) {
    cp = b0 & 0x1F;
    len = 2;
  } else if ((b0 >> 4) == 0xE) {
    cp = b0 & 0x0F;
    len = 3;
  } else if ((b0 >> 3) == 0x1E) {
    cp = b0 & 0x07;
    len = 4;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + len > s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char b = static_cast<unsigned char>(s[i + k]);
    if ((b >> 6) != 0x2) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  // Overlong encodings, surrogates, and out-of-range values are invalid.
  static constexpr char32_t kMin[5] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++i;
    return 0xFFFD;
  }
  i += len;
  return cp;
}

inline bool is_cjk(char32_t c) {
  return (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x4E00 && c <= 0x9FFF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x20000 && c <= 0x2FA1F);
}

inline bool is_alnum(char32_t c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Evaluation tokenization: CJK single characters plus lowercased ASCII
// alphanumeric words.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  const auto flush = [&] {
    if (!word.empty()) {
      out.push_back(word);
      word.clear();
    }
  };
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t before = i;
    const char32_t cp = decode_one(text, i);
    if (is_cjk(cp)) {
      flush();
      out.emplace_back(text.substr(before, i - before));
    } else if (is_alnum(cp)) {
      char c = static_cast<char>(cp);
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      word.push_back(c);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

inline std::map<std::vector<std::string>, int> ngram_counts(
    const std::vector<std::string>& tokens, int n) {
  std::map<std::vector<std::string>, int> counts;
  if (n <= 0 || tokens.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)]++;
  }
  return counts;
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline PRF prf(double matches, double cand_total, double ref_total) {
  PRF s;
  if (cand_total > 0) s.precision = matches / cand_total;
  if (ref_total > 0) s.recall = matches / ref_total;
  if (s.precision + s.recall > 0) {
    s.f1 = 2 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

inline PRF rouge_n(std::string_view cand, std::string_view ref, int n) {
  const auto c = ngram_counts(tokenize(cand), n);
  const auto r = ngram_counts(tokenize(ref), n);
  double c_total = 0, r_total = 0, matches = 0;
  for (const auto& [g, k] : c) c_total += k;
  for (const auto& [g, k] : r) r_total += k;
  if (c_total == 0 || r_total == 0) return {};
  for (const auto& [g, k] : c) {
    const auto it = r.find(g);
    if (it != r.end()) matches += std::min(k, it->second);
  }
  return prf(matches, c_total, r_total);
}

// Full-matrix LCS length.
inline std::size_t lcs_len(const std::vector<std::string>& a,
                           const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> dp(a.size() + 1,
                                           std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      dp[i][j] = (a[i - 1] == b[j - 1]) ? dp[i - 1][j - 1] + 1
                                        : std::max(dp[i - 1][j], dp[i][j - 1]);
    }
  }
  return dp[a.size()][b.size()];
}

// Exponential-time LCS by subsequence enumeration over the shorter side.
// Usable only for tiny inputs (the caller keeps sizes <= ~12).
inline std::size_t lcs_len_exhaustive(const std::vector<std::string>& a,
                                      const std::vector<std::string>& b) {
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  std::size_t best = 0;
  const std::size_t n = small.size();
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<std::string> sub;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) sub.push_back(small[i]);
    }
    if (sub.size() <= best) continue;
    // Is `sub` a subsequence of `large`?
    std::size_t j = 0;
    for (const std::string& tok : large) {
      if (j < sub.size() && tok == sub[j]) ++j;
    }
    if (j == sub.size()) best = sub.size();
  }
  return best;
}

inline PRF rouge_l(std::string_view cand, std::string_view ref) {
  const auto c = tokenize(cand);
  const auto r = tokenize(ref);
  if (c.empty() || r.empty()) return {};
  const double l = static_cast<double>(lcs_len(c, r));
  return prf(l, static_cast<double>(c.size()), static_cast<double>(r.size()));
}

inline double bleu(std::string_view cand, std::string_view ref, int max_n) {
  const auto c = tokenize(cand);
  const auto r = tokenize(ref);
  if (c.empty() || r.empty()) return 0.0;
  const double bp =
      std::min(1.0, std::exp(1.0 - static_cast<double>(r.size()) /
                                       static_cast<double>(c.size())));
  std::vector<double> precisions;
  for (int n = 1; n <= max_n; ++n) {
    const auto cc = ngram_counts(c, n);
    const auto rc = ngram_counts(r, n);
    double total = 0, matched = 0;
    for (const auto& [g, k] : cc) {
      total += k;
      const auto it = rc.find(g);
      if (it != rc.end()) matched += std::min(k, it->second);
    }
    precisions.push_back(total > 0 ? matched / total : 0.0);
  }
  if (precisions[0] == 0.0) return 0.0;
  if (max_n == 1) return bp * precisions[0];
  double log_sum = 0.0;
  for (const double p : precisions) {
    log_sum += std::log(std::max(p, 1e-9)) / max_n;
  }
  return bp * std::exp(log_sum);
}

}  // namespace naive
