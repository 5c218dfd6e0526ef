#include "counsel/trace.hpp"

#include <sstream>

#include "counsel/text.hpp"
#include "json.hpp"

namespace counsel {

const char* to_string(TerminalReason reason) {
  switch (reason) {
    case TerminalReason::pass: return "pass";
    case TerminalReason::decision_empty: return "decision_empty";
    case TerminalReason::budget_exhausted: return "budget_exhausted";
  }
  return "pass";
}

TerminalReason terminal_reason_from_string(const std::string& s) {
  if (s == "pass") return TerminalReason::pass;
  if (s == "decision_empty") return TerminalReason::decision_empty;
  if (s == "budget_exhausted") return TerminalReason::budget_exhausted;
  throw MalformedTrace("unknown terminal reason: " + s);
}

TraceStep& OrchestrationTrace::add_step(std::string agent_role, std::string label,
                                        std::string input_digest,
                                        std::string output_digest,
                                        double duration_ms,
                                        std::vector<std::string> warnings) {
  TraceStep step;
  step.index = static_cast<int>(steps.size());
  step.agent_role = std::move(agent_role);
  step.label = std::move(label);
  step.input_digest = std::move(input_digest);
  step.output_digest = std::move(output_digest);
  step.duration_ms = freeze_time ? 0.0 : duration_ms;
  step.warnings = std::move(warnings);
  steps.push_back(std::move(step));
  return steps.back();
}

std::string trace_to_json(const OrchestrationTrace& trace) {
  using json = nlohmann::ordered_json;
  json j;
  j["schema_version"] = 1;
  j["trace_id"] = trace.trace_id;
  j["query_id"] = trace.query_id;
  j["terminal_reason"] = to_string(trace.terminal_reason);
  j["iterations_run"] = trace.iterations_run;
  j["steps"] = json::array();
  for (const TraceStep& s : trace.steps) {
    json js;
    js["index"] = s.index;
    js["agent_role"] = s.agent_role;
    js["label"] = s.label;
    js["input_digest"] = s.input_digest;
    js["output_digest"] = s.output_digest;
    js["duration_ms"] = s.duration_ms;
    js["warnings"] = s.warnings;
    j["steps"].push_back(std::move(js));
  }
  return j.dump();
}

OrchestrationTrace trace_from_json(const std::string& json_line) {
  const auto j = nlohmann::json::parse(json_line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    throw MalformedTrace("trace line is not a JSON object");
  }
  OrchestrationTrace t;
  try {
    t.trace_id = j.at("trace_id").get<std::string>();
    t.query_id = j.at("query_id").get<std::string>();
    t.terminal_reason =
        terminal_reason_from_string(j.at("terminal_reason").get<std::string>());
    t.iterations_run = j.at("iterations_run").get<int>();
    for (const auto& js : j.at("steps")) {
      TraceStep s;
      s.index = js.at("index").get<int>();
      s.agent_role = js.at("agent_role").get<std::string>();
      s.label = js.at("label").get<std::string>();
      s.input_digest = js.at("input_digest").get<std::string>();
      s.output_digest = js.at("output_digest").get<std::string>();
      s.duration_ms = js.at("duration_ms").get<double>();
      s.warnings = js.at("warnings").get<std::vector<std::string>>();
      t.steps.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedTrace("trace line missing fields: " + std::string(e.what()));
  }
  return t;
}

std::string replay_trace(const OrchestrationTrace& trace) {
  if (trace.steps.empty()) throw MalformedTrace("trace has no steps");
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    if (trace.steps[i].index != static_cast<int>(i)) {
      throw MalformedTrace("step indices are not consecutive from zero");
    }
  }
  std::ostringstream os;
  os << "trace " << trace.trace_id << " query=" << trace.query_id
     << " terminal=" << to_string(trace.terminal_reason)
     << " iterations=" << trace.iterations_run << " steps=" << trace.steps.size()
     << '\n';
  for (const TraceStep& s : trace.steps) {
    char line[256];
    std::snprintf(line, sizeof(line), "  [%d] %-13s %s", s.index,
                  s.agent_role.c_str(), s.label.empty() ? "-" : s.label.c_str());
    os << line << '\n';
    char detail[256];
    std::snprintf(detail, sizeof(detail), "      in=%s out=%s %.1fms",
                  s.input_digest.c_str(), s.output_digest.c_str(), s.duration_ms);
    os << detail << '\n';
    for (const std::string& w : s.warnings) os << "      warning: " << w << '\n';
  }
  return os.str();
}

}  // namespace counsel
