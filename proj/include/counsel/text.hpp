#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace counsel {

// One decoded Unicode scalar with its byte extent in the source string.
struct Codepoint {
  char32_t value;
  std::size_t offset;  // byte offset of the first byte
  std::size_t size;    // number of bytes consumed
};

// Decodes UTF-8. Invalid byte sequences yield U+FFFD, one byte at a time,
// so offsets always cover the whole input.
std::vector<Codepoint> decode_utf8(std::string_view text);

std::string encode_utf8(char32_t cp);

// Unified ideographs (URO, extension A, compatibility block, plane-2
// extensions). The segmentation below treats only these as CJK.
bool is_cjk(char32_t cp);
bool is_ascii_alnum(char32_t cp);
bool is_ascii_digit(char32_t cp);

// A maximal run of same-class characters after dropping everything that is
// neither CJK nor ASCII alphanumeric. CJK runs keep one unit per character;
// other runs collapse to a single lowercased word.
struct TextRun {
  bool cjk;
  std::vector<std::string> units;
};

std::vector<TextRun> segment_runs(std::string_view text);

std::string trim(std::string_view s);
std::string ascii_lower(std::string_view s);
bool icontains(std::string_view haystack, std::string_view needle);
bool istarts_with(std::string_view s, std::string_view prefix);
std::vector<std::string> split_lines(std::string_view s);

// 64-bit FNV-1a over the raw bytes, as 16 lowercase hex digits. Used for
// request/trace digests; not a cryptographic hash.
std::uint64_t fnv1a64(std::string_view data);
std::string fnv1a64_hex(std::string_view data);

// Fixed-point decimal formatting that never depends on the global locale.
std::string format_double(double v, int decimals);

// 12,345-style grouping for table rendering.
std::string format_thousands(std::uint64_t v);

}  // namespace counsel
