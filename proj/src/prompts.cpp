#include "counsel/prompts.hpp"

#include <fstream>
#include <sstream>

#include "counsel/errors.hpp"

namespace counsel {

namespace {

const char* kGraphSchema = R"({
  "entities": [{ "name": "...", "type": "...", "attributes": {...} }],
  "events": [{ "description": "...", "time": "..." }],
  "relationships": [{ "type": "...", "source": "...", "target": "..." }],
  "user_claims": ["..."],
  "key_facts": ["..."],
  "legal_questions": ["..."]
})";

std::string element_prompt() {
  std::string p =
      "You are a professional legal element extraction expert. Your tasks "
      "include:\n"
      "- Extract key case elements from the user's legal consultation;\n"
      "- Identify legal relationships and entities;\n"
      "- Clarify the user's legal demands;\n"
      "- Output a structured element graph in JSON format.\n\n"
      "Element Graph Format:\n";
  p += kGraphSchema;
  return p;
}

const char* kDraftPrompt =
    "You are a legal consultation draft generation agent. When a user "
    "submits a legal-related question, your task is to generate a "
    "professional response based on existing legal knowledge.";

const char* kManagerPrompt =
    "You are the decision-making agent in a multi-agent legal consultation "
    "system. Your task is to determine, based on the content of a draft "
    "legal response, whether it requires format refinement or legal "
    "citation supplementation.\n\n"
    "Decision Criteria:\n"
    "- If the response is not concise, lacks clear logic, or contains "
    "redundancy: Call: FormatCheckAgent;\n"
    "- If the response lacks statutory references: Call: LawSearchAgent;\n"
    "- If both issues apply: Call: FormatCheckAgent then LawSearchAgent;\n"
    "- If the response is acceptable: Pass";

const char* kFormatCheckPrompt =
    "Review the draft for clarity, redundancy, and stylistic issues. Output "
    "concrete editing suggestions without changing the legal meaning.";

const char* kLawSearchPrompt =
    "Retrieve authoritative legal provisions from Chinese law based on the "
    "question and draft response. Output only relevant statute texts.";

const char* kContentCheckPrompt =
    "Rewrite the draft into a fluent, professional legal opinion. Preserve "
    "meaning while fusing reasoning and statute into a dual-structured "
    "final output.";

const char* kNegativeGenPrompt =
    "Please generate a plausible but flawed response to the following legal "
    "consultation question. The response should appear reasonable on the "
    "surface but contain either incorrect legal references, flawed logical "
    "reasoning, or lack critical statutory support.\n\n"
    "Requirements:\n"
    "- The response must be grammatically fluent and professionally "
    "styled;\n"
    "- No social biases are allowed (e.g., based on gender, age, ethnicity, "
    "or region);\n"
    "- No fabricated or non-existent statute numbers are permitted;\n"
    "- The flaw should be mild\xE2\x80\x94such as subtle legal or factual "
    "inaccuracies\xE2\x80\x94not absurd or completely irrelevant;\n\n"
    "Instruction: Answer the following question. First, provide the flawed "
    "response, then specify the legal basis.";

const char* kFlagPrompt =
    "You review reference answers to legal consultation questions. Flag "
    "legal inaccuracies, irrelevant or misleading content, and "
    "misinterpretations of statutory provisions. If the answer is sound, "
    "reply with exactly OK. Otherwise reply on one line with FLAG: "
    "<semicolon-separated reasons> and on the next line SUGGEST: <revised "
    "answer>.";

std::string read_override(const std::filesystem::path& dir, const char* name,
                          const std::string& fallback) {
  const std::filesystem::path file = dir / (std::string(name) + ".txt");
  if (!std::filesystem::exists(file)) return fallback;
  std::ifstream f(file);
  if (!f) throw Error("io", "cannot read prompt file: " + file.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

}  // namespace

const std::string& graph_schema_hint() {
  static const std::string schema = kGraphSchema;
  return schema;
}

const PromptSet& PromptSet::builtin() {
  static const PromptSet prompts = [] {
    PromptSet p;
    p.element = element_prompt();
    p.draft = kDraftPrompt;
    p.manager = kManagerPrompt;
    p.format_check = kFormatCheckPrompt;
    p.law_search = kLawSearchPrompt;
    p.content_check = kContentCheckPrompt;
    p.negative_gen = kNegativeGenPrompt;
    p.flag = kFlagPrompt;
    return p;
  }();
  return prompts;
}

PromptSet PromptSet::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("prompt directory does not exist: " + dir.string());
  }
  PromptSet p = builtin();
  p.element = read_override(dir, "element", p.element);
  p.draft = read_override(dir, "draft", p.draft);
  p.manager = read_override(dir, "manager", p.manager);
  p.format_check = read_override(dir, "format_check", p.format_check);
  p.law_search = read_override(dir, "law_search", p.law_search);
  p.content_check = read_override(dir, "content_check", p.content_check);
  p.negative_gen = read_override(dir, "negative_gen", p.negative_gen);
  p.flag = read_override(dir, "flag", p.flag);
  return p;
}

}  // namespace counsel
