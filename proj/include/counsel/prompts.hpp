#pragma once

#include <filesystem>
#include <string>

namespace counsel {

// System prompts for every agent role. The built-in set ships with the
// library; load() lets deployments override any of them with plain text
// files named after the role (element.txt, draft.txt, ...).
struct PromptSet {
  std::string element;
  std::string draft;
  std::string manager;
  std::string format_check;
  std::string law_search;
  std::string content_check;
  std::string negative_gen;
  std::string flag;

  static const PromptSet& builtin();
  static PromptSet load(const std::filesystem::path& dir);
};

// JSON shape of an element graph, quoted back to the extraction agent when
// its first reply fails to parse.
const std::string& graph_schema_hint();

}  // namespace counsel
