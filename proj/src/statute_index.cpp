#include "counsel/statute_index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "counsel/text.hpp"
#include "json.hpp"

namespace counsel {

namespace {

constexpr char kIndexMagic[8] = {'C', 'S', 'I', 'D', 'X', 'B', 'I', 'N'};
constexpr std::uint32_t kIndexVersion = 1;

bool is_cn_numeral(char32_t cp) {
  static constexpr char32_t kNumerals[] = {
      U'零', U'〇', U'一', U'二', U'三', U'四', U'五', U'六', U'七', U'八',
      U'九', U'十', U'百', U'千', U'万', U'亿', U'两'};
  for (char32_t n : kNumerals) {
    if (cp == n) return true;
  }
  return false;
}

bool is_article_numeral(char32_t cp) {
  return is_ascii_digit(cp) || is_cn_numeral(cp);
}

// --- little-endian binary encoding helpers (endianness-independent) ---

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_str(std::string& out, const std::string& s) {
  put_u64(out, s.size());
  out.append(s);
}

struct ByteReader {
  std::string_view data;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > data.size()) throw Error("index-format", "truncated index file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    }
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[pos + i])) << (8 * i);
    }
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(data.substr(pos, n));
    pos += n;
    return s;
  }
};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  for (const TextRun& run : segment_runs(text)) {
    if (!run.cjk) {
      tokens.push_back(run.units.front());
      continue;
    }
    for (const std::string& ch : run.units) tokens.push_back(ch);
    for (std::size_t i = 0; i + 1 < run.units.size(); ++i) {
      tokens.push_back(run.units[i] + run.units[i + 1]);
    }
  }
  return tokens;
}

void StatuteIndex::finish_build() {
  std::uint64_t total = 0;
  doc_lengths_.clear();
  postings_.clear();
  by_key_.clear();
  by_article_.clear();
  by_norm_key_.clear();
  for (std::uint32_t d = 0; d < docs_.size(); ++d) {
    const Statute& s = docs_[d];
    const auto key = std::make_pair(s.law_name, s.article_id);
    if (!by_key_.emplace(key, d).second) {
      throw DuplicateStatute(s.law_name + " " + s.article_id);
    }
    by_article_[s.article_id].push_back(d);
    by_norm_key_.emplace(std::make_pair(normalize_law_name(s.law_name), s.article_id), d);
    const std::string content = s.law_name + " " + s.article_id + " " + s.text;
    std::unordered_map<std::string, std::uint32_t> tf;
    std::uint32_t len = 0;
    for (std::string& t : tokenize(content)) {
      ++tf[std::move(t)];
      ++len;
    }
    doc_lengths_.push_back(len);
    total += len;
    for (const auto& [term, freq] : tf) postings_[term].push_back({d, freq});
  }
  for (auto& [term, plist] : postings_) {
    std::sort(plist.begin(), plist.end(),
              [](const Posting& a, const Posting& b) { return a.doc_id < b.doc_id; });
  }
  avg_doc_length_ = docs_.empty() ? 0.0 : static_cast<double>(total) / docs_.size();
}

StatuteIndex StatuteIndex::build(std::vector<Statute> corpus, double k1, double b) {
  if (corpus.empty()) throw EmptyCorpus("cannot build an index from an empty corpus");
  StatuteIndex index;
  index.docs_ = std::move(corpus);
  index.k1_ = k1;
  index.b_ = b;
  index.finish_build();
  return index;
}

std::vector<SearchHit> StatuteIndex::search(std::string_view query, std::size_t k) const {
  const std::vector<std::string> terms = tokenize(query);
  if (terms.empty()) throw EmptyQuery("query yields no tokens: " + std::string(query));
  const double n = static_cast<double>(docs_.size());
  std::vector<double> scores(docs_.size(), 0.0);
  for (const std::string& t : terms) {
    const auto it = postings_.find(t);
    if (it == postings_.end()) continue;
    const double df = static_cast<double>(it->second.size());
    const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    for (const Posting& p : it->second) {
      const double tf = static_cast<double>(p.term_freq);
      const double norm =
          k1_ * (1.0 - b_ + b_ * doc_lengths_[p.doc_id] / avg_doc_length_);
      scores[p.doc_id] += idf * tf * (k1_ + 1.0) / (tf + norm);
    }
  }
  std::vector<SearchHit> hits;
  for (std::uint32_t d = 0; d < docs_.size(); ++d) {
    if (scores[d] > 0.0) hits.push_back({docs_[d], scores[d]});
  }
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.statute.law_name != b.statute.law_name) {
      return a.statute.law_name < b.statute.law_name;
    }
    return a.statute.article_id < b.statute.article_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

const Statute& StatuteIndex::lookup(const std::string& law_name,
                                    const std::string& article_id) const {
  const auto it = by_key_.find(std::make_pair(law_name, article_id));
  if (it == by_key_.end()) throw NotFound(law_name + " " + article_id);
  return docs_[it->second];
}

const Statute* StatuteIndex::resolve(const std::string& law_name,
                                     const std::string& article_id) const {
  if (!law_name.empty()) {
    const auto it =
        by_norm_key_.find(std::make_pair(normalize_law_name(law_name), article_id));
    return it == by_norm_key_.end() ? nullptr : &docs_[it->second];
  }
  const auto it = by_article_.find(article_id);
  if (it == by_article_.end() || it->second.size() != 1) return nullptr;
  return &docs_[it->second.front()];
}

void StatuteIndex::save(const std::filesystem::path& path) const {
  std::string out;
  out.append(kIndexMagic, sizeof(kIndexMagic));
  put_u32(out, kIndexVersion);
  put_f64(out, k1_);
  put_f64(out, b_);
  put_u64(out, docs_.size());
  for (const Statute& s : docs_) {
    put_str(out, s.law_name);
    put_str(out, s.article_id);
    put_str(out, s.text);
  }
  for (std::uint32_t len : doc_lengths_) put_u32(out, len);
  put_u64(out, postings_.size());
  for (const auto& [term, plist] : postings_) {
    put_str(out, term);
    put_u64(out, plist.size());
    for (const Posting& p : plist) {
      put_u32(out, p.doc_id);
      put_u32(out, p.term_freq);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("io", "cannot write index file: " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("io", "failed writing index file: " + path.string());
}

StatuteIndex StatuteIndex::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("io", "cannot read index file: " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string data = buf.str();
  ByteReader r{data};
  r.need(sizeof(kIndexMagic));
  if (data.compare(0, sizeof(kIndexMagic), kIndexMagic, sizeof(kIndexMagic)) != 0) {
    throw Error("index-format", "not a statute index file: " + path.string());
  }
  r.pos = sizeof(kIndexMagic);
  const std::uint32_t version = r.u32();
  if (version != kIndexVersion) {
    throw Error("index-format",
                "unsupported index version " + std::to_string(version));
  }
  StatuteIndex index;
  index.k1_ = r.f64();
  index.b_ = r.f64();
  const std::uint64_t ndocs = r.u64();
  for (std::uint64_t i = 0; i < ndocs; ++i) {
    Statute s;
    s.law_name = r.str();
    s.article_id = r.str();
    s.text = r.str();
    index.docs_.push_back(std::move(s));
  }
  // The stored lengths and postings are re-derived from the documents; the
  // file carries them so readers can skip tokenization, but rebuilding here
  // keeps one code path authoritative and validates the payload.
  for (std::uint64_t i = 0; i < ndocs; ++i) (void)r.u32();
  const std::uint64_t nterms = r.u64();
  for (std::uint64_t i = 0; i < nterms; ++i) {
    (void)r.str();
    const std::uint64_t nposts = r.u64();
    for (std::uint64_t j = 0; j < nposts; ++j) {
      (void)r.u32();
      (void)r.u32();
    }
  }
  if (index.docs_.empty()) throw EmptyCorpus("index file contains no documents");
  index.finish_build();
  return index;
}

std::vector<Statute> load_corpus(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot read corpus file: " + path.string());
  std::vector<Statute> corpus;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(lineno, "malformed JSON");
    Statute s;
    for (const char* key : {"law_name", "article_id", "text"}) {
      if (!j.contains(key) || !j.at(key).is_string()) {
        throw ParseError(lineno, std::string("missing string key ") + key);
      }
    }
    s.law_name = j.at("law_name").get<std::string>();
    s.article_id = j.at("article_id").get<std::string>();
    s.text = j.at("text").get<std::string>();
    corpus.push_back(std::move(s));
  }
  return corpus;
}

std::string normalize_law_name(std::string_view name) {
  std::string out;
  for (const Codepoint& c : decode_utf8(name)) {
    if (c.value == U'《' || c.value == U'》') continue;
    out += encode_utf8(c.value);
  }
  out = trim(out);
  static const std::string kPrefix = encode_utf8(U'中') + encode_utf8(U'华') +
                                     encode_utf8(U'人') + encode_utf8(U'民') +
                                     encode_utf8(U'共') + encode_utf8(U'和') +
                                     encode_utf8(U'国');
  if (out.rfind(kPrefix, 0) == 0) out = trim(out.substr(kPrefix.size()));
  return out;
}

std::vector<CitationMention> extract_citations(std::string_view text) {
  const std::vector<Codepoint> cps = decode_utf8(text);
  std::vector<CitationMention> mentions;

  std::string last_law;
  std::size_t last_law_open_byte = 0;
  std::size_t adjacent_after = static_cast<std::size_t>(-1);  // cp index where
  // an article mention is treated as part of the bracketed citation span

  const auto byte_end = [&](std::size_t cp_index) {
    return cps[cp_index].offset + cps[cp_index].size;
  };

  // Matches 第<numerals>条[之<numerals>] starting at cp index i. Returns the
  // cp index one past the match, or i when there is no match.
  const auto match_article = [&](std::size_t i) -> std::size_t {
    if (cps[i].value != U'第') return i;
    std::size_t j = i + 1;
    std::size_t digits = 0;
    while (j < cps.size() && is_article_numeral(cps[j].value)) {
      ++j;
      ++digits;
    }
    if (digits == 0 || j >= cps.size() || cps[j].value != U'条') return i;
    ++j;
    if (j < cps.size() && cps[j].value == U'之') {
      std::size_t k = j + 1;
      std::size_t suffix = 0;
      while (k < cps.size() && is_article_numeral(cps[k].value)) {
        ++k;
        ++suffix;
      }
      if (suffix > 0) j = k;  // otherwise the 之 belongs to following prose
    }
    return j;
  };

  // Matches the English form "Article N of [the] <law>" starting at cp
  // index i; appends a mention and returns the cp index one past it.
  const auto match_english = [&](std::size_t i) -> std::size_t {
    static constexpr std::string_view kWord = "article";
    if (i > 0 && is_ascii_alnum(cps[i - 1].value)) return i;
    std::size_t j = i;
    for (char c : kWord) {
      if (j >= cps.size() || (cps[j].value | 0x20) != static_cast<char32_t>(c)) return i;
      ++j;
    }
    std::size_t spaces = 0;
    while (j < cps.size() && cps[j].value == U' ') {
      ++j;
      ++spaces;
    }
    if (spaces == 0) return i;
    std::string number;
    while (j < cps.size() &&
           (is_ascii_digit(cps[j].value) || cps[j].value == U'-')) {
      number.push_back(static_cast<char>(cps[j].value));
      ++j;
    }
    if (number.empty() || number.front() == '-' || number.back() == '-') return i;
    std::size_t j2 = j;
    spaces = 0;
    while (j2 < cps.size() && cps[j2].value == U' ') {
      ++j2;
      ++spaces;
    }
    if (spaces == 0 || j2 + 1 >= cps.size()) return i;
    if ((cps[j2].value | 0x20) != U'o' || (cps[j2 + 1].value | 0x20) != U'f') return i;
    j2 += 2;
    while (j2 < cps.size() && cps[j2].value == U' ') ++j2;
    // optional leading "the "
    if (j2 + 3 < cps.size() && (cps[j2].value | 0x20) == U't' &&
        (cps[j2 + 1].value | 0x20) == U'h' && (cps[j2 + 2].value | 0x20) == U'e' &&
        cps[j2 + 3].value == U' ') {
      j2 += 4;
      while (j2 < cps.size() && cps[j2].value == U' ') ++j2;
    }
    const std::size_t law_start = j2;
    const auto ends_law = [](char32_t cp) {
      switch (cp) {
        case U'.': case U',': case U';': case U':': case U'!': case U'?':
        case U'\n': case U'\r': case U'(': case U')':
        case U'。': case U'，': case U'；': case U'：': case U'！': case U'？':
          return true;
        default:
          return false;
      }
    };
    std::size_t j3 = j2;
    while (j3 < cps.size() && !ends_law(cps[j3].value)) ++j3;
    if (j3 == law_start) return i;
    const std::size_t law_begin_byte = cps[law_start].offset;
    const std::size_t law_end_byte = byte_end(j3 - 1);
    const std::string law =
        trim(std::string(text.substr(law_begin_byte, law_end_byte - law_begin_byte)));
    if (law.empty()) return i;
    CitationMention m;
    m.law_name = law;
    m.article_id = "Article " + number;
    m.begin = cps[i].offset;
    m.end = law_end_byte;
    mentions.push_back(std::move(m));
    return j3;
  };

  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t cp = cps[i].value;
    if (cp == U'《') {
      std::size_t j = i + 1;
      while (j < cps.size() && cps[j].value != U'》') ++j;
      if (j < cps.size()) {
        const std::size_t begin = byte_end(i);
        last_law = std::string(text.substr(begin, cps[j].offset - begin));
        last_law_open_byte = cps[i].offset;
        adjacent_after = j + 1;
        i = j + 1;
        continue;
      }
      ++i;
      continue;
    }
    if (cp == U'第') {
      const std::size_t e = match_article(i);
      if (e > i) {
        CitationMention m;
        m.law_name = last_law;
        m.begin = (i == adjacent_after) ? last_law_open_byte : cps[i].offset;
        m.end = byte_end(e - 1);
        m.article_id = std::string(text.substr(cps[i].offset, m.end - cps[i].offset));
        mentions.push_back(std::move(m));
        i = e;
        continue;
      }
      ++i;
      continue;
    }
    if (cp == U'A' || cp == U'a') {
      const std::size_t e = match_english(i);
      if (e > i) {
        i = e;
        continue;
      }
    }
    ++i;
  }
  return mentions;
}

std::vector<CitationMention> verify_citations(std::string_view text,
                                              const StatuteIndex& index) {
  std::vector<CitationMention> mentions = extract_citations(text);
  for (CitationMention& m : mentions) {
    m.resolved = index.resolve(m.law_name, m.article_id) != nullptr;
  }
  return mentions;
}

}  // namespace counsel
