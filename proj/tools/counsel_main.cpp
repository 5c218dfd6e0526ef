// counsel: command-line front end for the consultation engine.
//
// Subcommands: consult, index build, index search, eval, dataset stats,
// dataset gen-neg, dataset flag, trace, serve. See README.md for formats.

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "counsel/config.hpp"
#include "counsel/core_types.hpp"
#include "counsel/dataset.hpp"
#include "counsel/metrics.hpp"
#include "counsel/orchestrator.hpp"
#include "counsel/service.hpp"
#include "counsel/statute_index.hpp"
#include "counsel/text.hpp"
#include "json.hpp"

namespace {

using namespace counsel;

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBackend = 3;
constexpr int kExitExtraction = 4;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot read file: " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("io", "cannot write file: " + path.string());
  f << content;
}

bool is_backend_failure(const std::string& code) {
  return code == "transport" || code == "timeout" || code == "remote-status" ||
         code == "retries-exhausted" || code == "missing-credential" ||
         code == "script-exhausted" || code == "malformed-reply";
}

StatuteIndex load_index_for(const AppConfig& cfg) {
  if (!cfg.index_cache_path.empty()) return StatuteIndex::load(cfg.index_cache_path);
  if (cfg.corpus_path.empty()) {
    throw ConfigError("config needs corpus_path or index_cache_path");
  }
  return StatuteIndex::build(load_corpus(cfg.corpus_path));
}

// JSONL reader for eval inputs: each line is an object; the value is taken
// from `key`, falling back to "text".
std::vector<std::string> read_text_column(const std::filesystem::path& path,
                                          const char* key) {
  std::ifstream f(path);
  if (!f) throw Error("io", "cannot read file: " + path.string());
  std::vector<std::string> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(lineno, "malformed JSON");
    if (j.contains(key) && j.at(key).is_string()) {
      out.push_back(j.at(key).get<std::string>());
    } else if (j.contains("text") && j.at("text").is_string()) {
      out.push_back(j.at("text").get<std::string>());
    } else {
      throw ParseError(lineno, std::string("missing string key ") + key);
    }
  }
  return out;
}

int cmd_consult(const std::string& config_path, const std::string& question,
                const std::string& question_file, const std::string& graph_out,
                const std::string& trace_out, int max_iter, bool test_mode) {
  AppConfig cfg;
  try {
    cfg = AppConfig::load(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  if (max_iter >= 0) cfg.orchestrator.max_iterations = max_iter;
  if (test_mode) {
    cfg.orchestrator.test_mode = true;
    cfg.backend.jitter = false;
  }

  ConsultationQuery query;
  try {
    query.text = question_file.empty() ? question : read_file(question_file);
    query.id = "q-" + fnv1a64_hex(query.text);
    if (trim(query.text).empty()) throw ConfigError("question text is empty");

    const StatuteIndex index = load_index_for(cfg);
    const auto backend = make_backend(cfg);
    const PromptSet prompts = cfg.prompts();
    const ConsultResult result =
        consult(query, cfg.orchestrator, *backend, index, prompts);
    if (!graph_out.empty()) write_file(graph_out, serialize_graph(result.graph) + "\n");
    if (!trace_out.empty()) {
      std::ofstream f(trace_out, std::ios::app);
      if (!f) throw Error("io", "cannot append to trace file: " + trace_out);
      f << trace_to_json(result.trace) << '\n';
    }
    std::cout << render_opinion(result.opinion);
    return 0;
  } catch (const ConsultError& e) {
    std::cerr << "consultation failed: " << e.what() << '\n';
    if (!trace_out.empty()) {
      std::ofstream f(trace_out, std::ios::app);
      if (f) f << trace_to_json(e.partial_trace) << '\n';
    }
    if (e.cause_code == "extraction-failed") return kExitExtraction;
    if (is_backend_failure(e.cause_code)) return kExitBackend;
    return kExitError;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_backend_failure(e.code()) ? kExitBackend : kExitError;
  }
}

int cmd_index_build(const std::string& corpus_path, const std::string& out_path) {
  const std::vector<Statute> corpus = load_corpus(corpus_path);
  const StatuteIndex index = StatuteIndex::build(corpus);
  index.save(out_path);
  std::cout << "indexed " << index.size() << " statutes ("
            << index.postings().size() << " terms, avg length "
            << format_double(index.avg_doc_length(), 2) << ")\n";
  return 0;
}

int cmd_index_search(const std::string& corpus_path, const std::string& index_path,
                     const std::string& query, std::size_t k) {
  StatuteIndex index = index_path.empty()
                           ? StatuteIndex::build(load_corpus(corpus_path))
                           : StatuteIndex::load(index_path);
  const std::vector<SearchHit> hits = index.search(query, k);
  for (std::size_t i = 0; i < hits.size(); ++i) {
    std::cout << (i + 1) << '\t' << format_double(hits[i].score, 6) << '\t'
              << hits[i].statute.law_name << '\t' << hits[i].statute.article_id
              << '\n';
  }
  if (hits.empty()) std::cout << "(no matches)\n";
  return 0;
}

int cmd_eval(const std::string& predictions_path, const std::string& references_path,
             int bleu_n, const std::string& report_out) {
  const std::vector<std::string> predictions =
      read_text_column(predictions_path, "prediction");
  const std::vector<std::string> references =
      read_text_column(references_path, "reference");
  if (predictions.size() != references.size()) {
    std::cerr << "misaligned inputs: " << predictions.size() << " predictions vs "
              << references.size() << " references\n";
    return kExitError;
  }
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    pairs.emplace_back(predictions[i], references[i]);
  }
  const EvalReport report = evaluate_corpus(pairs, bleu_n);
  std::cout << render_eval_table(report);
  if (!report_out.empty()) write_file(report_out, eval_report_json(report) + "\n");
  return 0;
}

int cmd_dataset_stats(const std::string& file) {
  const std::vector<Triplet> data = load_triplets(file);
  std::cout << render_stats_table(compute_stats(data));
  return 0;
}

// Input JSONL: {"id", "query", "positive"}. Accepted negatives go to
// --out; rejected records go to --review-out with their reports.
int cmd_dataset_gen_neg(const std::string& config_path, const std::string& pairs_path,
                        const std::string& out_path, const std::string& review_path) {
  AppConfig cfg;
  try {
    cfg = AppConfig::load(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const StatuteIndex index = load_index_for(cfg);
  const auto backend = make_backend(cfg);
  const PromptSet prompts = cfg.prompts();

  std::ifstream in(pairs_path);
  if (!in) throw Error("io", "cannot read pairs file: " + pairs_path);
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) throw Error("io", "cannot write output file: " + out_path);
  std::ofstream review;
  if (!review_path.empty()) review.open(review_path, std::ios::trunc);

  std::string line;
  std::size_t lineno = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(lineno, "malformed JSON");
    for (const char* key : {"id", "query", "positive"}) {
      if (!j.contains(key) || !j.at(key).is_string()) {
        throw ParseError(lineno, std::string("missing string key ") + key);
      }
    }
    ConsultationQuery query;
    query.id = j.at("id").get<std::string>();
    query.text = j.at("query").get<std::string>();
    const std::string positive = j.at("positive").get<std::string>();
    try {
      const NegativeResult result =
          generate_negative(query, positive, *backend, index, prompts);
      nlohmann::ordered_json record;
      record["id"] = query.id;
      record["query"] = query.text;
      record["positive"] = positive;
      record["negative"] = result.text;
      record["attempts"] = result.attempts;
      out << record.dump() << '\n';
      ++accepted;
    } catch (const GenerationRejected& e) {
      ++rejected;
      if (review.is_open()) {
        nlohmann::ordered_json record;
        record["id"] = query.id;
        record["query"] = query.text;
        record["attempts"] = e.attempts;
        record["violations"] = nlohmann::json::array();
        for (const NegativeReport& r : e.reports) {
          record["violations"].push_back(r.violations);
        }
        review << record.dump() << '\n';
      }
      std::cerr << "rejected " << query.id << ": " << e.what() << '\n';
    }
  }
  std::cout << "accepted " << accepted << ", rejected " << rejected << '\n';
  return rejected == 0 ? 0 : kExitError;
}

// Input JSONL: {"id", "query", "reference"}. Output: flag reports.
int cmd_dataset_flag(const std::string& config_path, const std::string& file,
                     const std::string& out_path) {
  AppConfig cfg;
  try {
    cfg = AppConfig::load(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto backend = make_backend(cfg);
  const PromptSet prompts = cfg.prompts();

  std::ifstream in(file);
  if (!in) throw Error("io", "cannot read input file: " + file);
  std::ofstream out;
  if (!out_path.empty()) out.open(out_path, std::ios::trunc);

  std::string line;
  std::size_t lineno = 0;
  std::size_t suspects = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError(lineno, "malformed JSON");
    for (const char* key : {"id", "query", "reference"}) {
      if (!j.contains(key) || !j.at(key).is_string()) {
        throw ParseError(lineno, std::string("missing string key ") + key);
      }
    }
    ConsultationQuery query;
    query.id = j.at("id").get<std::string>();
    query.text = j.at("query").get<std::string>();
    const FlagReport report =
        flag_suspect(query, j.at("reference").get<std::string>(), *backend, prompts);
    if (report.suspect) ++suspects;
    nlohmann::ordered_json record;
    record["id"] = query.id;
    record["suspect"] = report.suspect;
    record["reasons"] = report.reasons;
    record["suggested_revision"] = report.suggested_revision;
    if (out.is_open()) {
      out << record.dump() << '\n';
    } else {
      std::cout << record.dump() << '\n';
    }
  }
  std::cerr << "flagged " << suspects << " suspect record(s)\n";
  return 0;
}

int cmd_trace(const std::string& file, const std::string& id) {
  std::ifstream f(file);
  if (!f) throw Error("io", "cannot read trace file: " + file);
  std::string line;
  std::size_t shown = 0;
  while (std::getline(f, line)) {
    if (trim(line).empty()) continue;
    const OrchestrationTrace trace = trace_from_json(line);
    if (!id.empty() && trace.trace_id != id) continue;
    std::cout << replay_trace(trace);
    ++shown;
  }
  if (shown == 0) {
    std::cerr << (id.empty() ? "no traces in file" : "trace id not found: " + id)
              << '\n';
    return kExitError;
  }
  return 0;
}

std::atomic<bool> g_stop_requested{false};

void handle_signal(int) { g_stop_requested.store(true); }

int cmd_serve(const std::string& config_path) {
  AppConfig cfg;
  try {
    cfg = AppConfig::load(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  auto index = std::make_shared<StatuteIndex>(load_index_for(cfg));
  std::shared_ptr<ChatBackend> backend = make_backend(cfg);
  ConsultService service(cfg, backend, index);
  const int port = service.start();
  if (port < 0) {
    std::cerr << "failed to bind " << cfg.bind_address << ":" << cfg.port << '\n';
    return kExitError;
  }
  std::cerr << "listening on " << cfg.bind_address << ":" << port << " ("
            << index->size() << " statutes)\n";
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop_requested.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  std::cerr << "draining...\n";
  service.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent legal consultation engine"};
  app.require_subcommand(1);

  // consult
  std::string config_path;
  std::string question;
  std::string question_file;
  std::string graph_out;
  std::string trace_out;
  int max_iter = -1;
  bool test_mode = false;
  CLI::App* consult = app.add_subcommand("consult", "Run one consultation");
  consult->add_option("--config", config_path, "Config JSON path")->required();
  consult->add_option("question", question, "Question text");
  consult->add_option("--question-file", question_file, "Read the question from a file");
  consult->add_option("--graph-out", graph_out, "Write the element graph JSON here");
  consult->add_option("--trace-out", trace_out, "Append the run trace (JSONL) here");
  consult->add_option("--max-iter", max_iter, "Override the repair-loop budget");
  consult->add_flag("--test-mode", test_mode,
                    "Freeze clocks and disable retry jitter for reproducible output");

  // index
  CLI::App* index_cmd = app.add_subcommand("index", "Statute index operations");
  index_cmd->require_subcommand(1);
  std::string corpus_path;
  std::string index_out;
  CLI::App* index_build = index_cmd->add_subcommand("build", "Build and save an index");
  index_build->add_option("--corpus", corpus_path, "Statutes JSONL")->required();
  index_build->add_option("--out", index_out, "Output index path")->required();
  std::string search_corpus;
  std::string search_index;
  std::string search_query;
  std::size_t search_k = 5;
  CLI::App* index_search = index_cmd->add_subcommand("search", "Query an index");
  index_search->add_option("--corpus", search_corpus, "Statutes JSONL (built on the fly)");
  index_search->add_option("--index", search_index, "Prebuilt index path");
  index_search->add_option("--query", search_query, "Query text")->required();
  index_search->add_option("-k,--top-k", search_k, "Result count");

  // eval
  std::string predictions_path;
  std::string references_path;
  int bleu_n = 4;
  std::string report_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score predictions against references");
  eval_cmd->add_option("--predictions", predictions_path, "Predictions JSONL")->required();
  eval_cmd->add_option("--references", references_path, "References JSONL")->required();
  eval_cmd->add_option("--bleu-n", bleu_n, "Highest BLEU order to report");
  eval_cmd->add_option("--out", report_out, "Write the JSON report here");

  // dataset
  CLI::App* dataset_cmd = app.add_subcommand("dataset", "Preference-dataset tooling");
  dataset_cmd->require_subcommand(1);
  std::string stats_file;
  CLI::App* stats_cmd = dataset_cmd->add_subcommand("stats", "Per-split statistics");
  stats_cmd->add_option("--file", stats_file, "Triplets JSONL")->required();
  std::string gen_config;
  std::string gen_pairs;
  std::string gen_out;
  std::string gen_review;
  CLI::App* gen_cmd = dataset_cmd->add_subcommand("gen-neg", "Generate rejected answers");
  gen_cmd->add_option("--config", gen_config, "Config JSON path")->required();
  gen_cmd->add_option("--pairs", gen_pairs, "Input JSONL (id/query/positive)")->required();
  gen_cmd->add_option("--out", gen_out, "Accepted triplets JSONL")->required();
  gen_cmd->add_option("--review-out", gen_review, "Rejected candidates JSONL");
  std::string flag_config;
  std::string flag_file;
  std::string flag_out;
  CLI::App* flag_cmd = dataset_cmd->add_subcommand("flag", "Review reference answers");
  flag_cmd->add_option("--config", flag_config, "Config JSON path")->required();
  flag_cmd->add_option("--file", flag_file, "Input JSONL (id/query/reference)")->required();
  flag_cmd->add_option("--out", flag_out, "Flag reports JSONL (default: stdout)");

  // trace
  std::string trace_file;
  std::string trace_id;
  CLI::App* trace_cmd = app.add_subcommand("trace", "Replay persisted traces");
  trace_cmd->add_option("--file", trace_file, "Trace JSONL")->required();
  trace_cmd->add_option("--id", trace_id, "Show only this trace");

  // serve
  std::string serve_config;
  CLI::App* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--config", serve_config, "Config JSON path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (consult->parsed()) {
      if (question.empty() && question_file.empty()) {
        std::cerr << "consult needs a question argument or --question-file\n";
        return kExitConfig;
      }
      return cmd_consult(config_path, question, question_file, graph_out, trace_out,
                         max_iter, test_mode);
    }
    if (index_build->parsed()) return cmd_index_build(corpus_path, index_out);
    if (index_search->parsed()) {
      if (search_corpus.empty() && search_index.empty()) {
        std::cerr << "index search needs --corpus or --index\n";
        return kExitConfig;
      }
      return cmd_index_search(search_corpus, search_index, search_query, search_k);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(predictions_path, references_path, bleu_n, report_out);
    }
    if (stats_cmd->parsed()) return cmd_dataset_stats(stats_file);
    if (gen_cmd->parsed()) {
      return cmd_dataset_gen_neg(gen_config, gen_pairs, gen_out, gen_review);
    }
    if (flag_cmd->parsed()) return cmd_dataset_flag(flag_config, flag_file, flag_out);
    if (trace_cmd->parsed()) return cmd_trace(trace_file, trace_id);
    if (serve_cmd->parsed()) return cmd_serve(serve_config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
