#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace counsel {

// Base class for all library failures. `code()` is a stable,
// machine-readable slug; `what()` is the human-readable message.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct EmptyQuery : Error {
  explicit EmptyQuery(const std::string& m = "query text is empty")
      : Error("empty-query", m) {}
};

struct EmptyCorpus : Error {
  explicit EmptyCorpus(const std::string& m = "corpus is empty")
      : Error("empty-corpus", m) {}
};

struct ParseError : Error {
  explicit ParseError(std::size_t line, const std::string& m = "malformed record")
      : Error("parse-error", m + " (line " + std::to_string(line) + ")"),
        line(line) {}
  std::size_t line;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& m) : Error("config-error", m) {}
};

}  // namespace counsel
