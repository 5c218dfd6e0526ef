// Python bindings for the consultation engine. Exposes the element-graph
// operations, statute retrieval, text metrics, preference-data helpers,
// and a scripted end-to-end consultation entry point.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>

#include "counsel/agents.hpp"
#include "counsel/core_types.hpp"
#include "counsel/dataset.hpp"
#include "counsel/llm_backend.hpp"
#include "counsel/metrics.hpp"
#include "counsel/orchestrator.hpp"
#include "counsel/prompts.hpp"
#include "counsel/statute_index.hpp"
#include "counsel/text.hpp"
#include "counsel/trace.hpp"

namespace py = pybind11;
using namespace counsel;

namespace {

// One consultation against a scripted backend. `scenario` maps an agent
// role to its ordered list of replies (strings or JSON-like dicts).
py::dict consult_scripted(const std::string& question, const py::object& scenario,
                          const std::string& corpus_path, int max_iterations,
                          std::size_t top_k) {
  py::object json_mod = py::module_::import("json");
  const std::string scenario_json =
      py::cast<std::string>(json_mod.attr("dumps")(scenario));
  ScriptedBackend backend(load_scenario_text(scenario_json));

  ConsultationQuery query;
  query.text = question;
  query.id = "q-" + fnv1a64_hex(question);

  const StatuteIndex index = StatuteIndex::build(load_corpus(corpus_path));
  OrchestratorConfig config;
  config.test_mode = true;
  if (max_iterations >= 0) config.max_iterations = max_iterations;
  config.top_k_statutes = top_k;

  const ConsultResult result =
      consult(query, config, backend, index, PromptSet::builtin());

  py::dict out;
  out["response"] = result.opinion.response;
  py::list basis;
  for (const StatuteCitation& c : result.opinion.legal_basis) {
    py::dict item;
    item["law_name"] = c.law_name;
    item["article_id"] = c.article_id;
    item["text"] = c.text;
    basis.append(item);
  }
  out["legal_basis"] = basis;
  out["rendered"] = render_opinion(result.opinion);
  out["trace"] = json_mod.attr("loads")(trace_to_json(result.trace));
  out["graph"] = json_mod.attr("loads")(serialize_graph(result.graph));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-agent legal consultation engine (C++ core)";

  py::register_exception<Error>(m, "CounselError", PyExc_RuntimeError);

  // --- element graph -------------------------------------------------------
  py::class_<Entity>(m, "Entity")
      .def(py::init<>())
      .def_readwrite("name", &Entity::name)
      .def_readwrite("type_label", &Entity::type_label)
      .def_readwrite("attributes", &Entity::attributes);

  py::class_<Event>(m, "Event")
      .def(py::init<>())
      .def_readwrite("description", &Event::description)
      .def_readwrite("time", &Event::time)
      .def_readwrite("attributes", &Event::attributes);

  py::class_<Relationship>(m, "Relationship")
      .def(py::init<>())
      .def_readwrite("relation_type", &Relationship::relation_type)
      .def_readwrite("source", &Relationship::source)
      .def_readwrite("target", &Relationship::target);

  py::class_<ElementGraph>(m, "ElementGraph")
      .def(py::init<>())
      .def_readwrite("entities", &ElementGraph::entities)
      .def_readwrite("events", &ElementGraph::events)
      .def_readwrite("relationships", &ElementGraph::relationships)
      .def_readwrite("user_claims", &ElementGraph::user_claims)
      .def_readwrite("key_facts", &ElementGraph::key_facts)
      .def_readwrite("legal_questions", &ElementGraph::legal_questions)
      .def("__eq__", [](const ElementGraph& a, const ElementGraph& b) { return a == b; });

  py::class_<Violation>(m, "Violation")
      .def_readonly("code", &Violation::code)
      .def_readonly("path", &Violation::path)
      .def_readonly("detail", &Violation::detail)
      .def("__repr__", [](const Violation& v) {
        return "<Violation " + v.code + " at " + v.path + ">";
      });

  py::class_<ValidationReport>(m, "ValidationReport")
      .def_readonly("violations", &ValidationReport::violations)
      .def("ok", &ValidationReport::ok);

  m.def("validate_graph", &validate_graph, py::arg("graph"));
  m.def("serialize_graph", &serialize_graph, py::arg("graph"));
  m.def("parse_graph", &parse_graph, py::arg("reply_text"));
  m.def(
      "encode_prompt",
      [](const ElementGraph& graph, const std::string& question) {
        ConsultationQuery q;
        q.text = question;
        return encode_prompt(graph, q).full_text;
      },
      py::arg("graph"), py::arg("question"));

  // --- statute retrieval ----------------------------------------------------
  py::class_<Statute>(m, "Statute")
      .def(py::init<>())
      .def_readwrite("law_name", &Statute::law_name)
      .def_readwrite("article_id", &Statute::article_id)
      .def_readwrite("text", &Statute::text);

  py::class_<SearchHit>(m, "SearchHit")
      .def_readonly("statute", &SearchHit::statute)
      .def_readonly("score", &SearchHit::score);

  py::class_<CitationMention>(m, "CitationMention")
      .def_readonly("law_name", &CitationMention::law_name)
      .def_readonly("article_id", &CitationMention::article_id)
      .def_readonly("begin", &CitationMention::begin)
      .def_readonly("end", &CitationMention::end)
      .def_readonly("resolved", &CitationMention::resolved);

  py::class_<StatuteIndex>(m, "StatuteIndex")
      .def_static("build", &StatuteIndex::build, py::arg("corpus"),
                  py::arg("k1") = 1.2, py::arg("b") = 0.75)
      .def_static("load", &StatuteIndex::load, py::arg("path"))
      .def("save", &StatuteIndex::save, py::arg("path"))
      .def("search", &StatuteIndex::search, py::arg("query"), py::arg("top_k") = 5)
      .def("lookup", &StatuteIndex::lookup, py::arg("law_name"), py::arg("article_id"))
      .def("__len__", &StatuteIndex::size);

  m.def("load_corpus", &load_corpus, py::arg("path"));
  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("extract_citations", &extract_citations, py::arg("text"));
  m.def("verify_citations", &verify_citations, py::arg("text"), py::arg("index"));
  m.def("normalize_law_name", &normalize_law_name, py::arg("name"));

  // --- metrics ---------------------------------------------------------------
  py::class_<MetricScore>(m, "MetricScore")
      .def_readonly("precision", &MetricScore::precision)
      .def_readonly("recall", &MetricScore::recall)
      .def_readonly("f1", &MetricScore::f1);

  m.def("metric_tokenize", &metric_tokenize, py::arg("text"));
  m.def("rouge_n", &rouge_n, py::arg("candidate"), py::arg("reference"), py::arg("n"));
  m.def("rouge_l", &rouge_l, py::arg("candidate"), py::arg("reference"));
  m.def("bleu", &bleu, py::arg("candidate"), py::arg("reference"), py::arg("max_n") = 4);

  // --- preference data --------------------------------------------------------
  py::enum_<Split>(m, "Split")
      .value("train", Split::train)
      .value("val", Split::val)
      .value("test", Split::test);

  py::class_<Triplet>(m, "Triplet")
      .def(py::init<>())
      .def_readwrite("id", &Triplet::id)
      .def_readwrite("query", &Triplet::query)
      .def_readwrite("positive", &Triplet::positive)
      .def_readwrite("negative", &Triplet::negative)
      .def_readwrite("split", &Triplet::split);

  m.def("load_triplets", &load_triplets, py::arg("path"));
  m.def(
      "dpo_pref",
      [](double logp_positive, double logp_negative, double beta) {
        DpoInputs in;
        in.logp_positive = logp_positive;
        in.logp_negative = logp_negative;
        in.beta = beta;
        return dpo_pref(dpo_gap(in), beta);
      },
      py::arg("logp_positive"), py::arg("logp_negative"), py::arg("beta") = 0.1);
  m.def(
      "dpo_loss",
      [](const std::vector<std::pair<double, double>>& pairs, double beta) {
        std::vector<DpoInputs> batch;
        batch.reserve(pairs.size());
        for (const auto& [pos, neg] : pairs) {
          DpoInputs in;
          in.logp_positive = pos;
          in.logp_negative = neg;
          in.beta = beta;
          batch.push_back(in);
        }
        return dpo_loss(batch);
      },
      py::arg("pairs"), py::arg("beta") = 0.1);

  // --- traces and consultation -------------------------------------------------
  m.def(
      "replay_trace",
      [](const std::string& trace_json) { return replay_trace(trace_from_json(trace_json)); },
      py::arg("trace_json"));
  m.def("consult_scripted", &consult_scripted, py::arg("question"), py::arg("scenario"),
        py::arg("corpus_path"), py::arg("max_iterations") = -1, py::arg("top_k") = 3);
}
