#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "counsel/config.hpp"
#include "counsel/service.hpp"
#include "counsel/statute_index.hpp"
#include "counsel/trace.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

using namespace counsel;
using json = nlohmann::json;

namespace {

const std::string kFixtureDir = COUNSEL_FIXTURE_DIR;

const std::string kQuestion =
    "我在2011年因为醉酒驾驶被判处拘役三个月，现在已经过去十多年了。"
    "我的孩子今年准备报考航空学校，请问我的犯罪记录会影响孩子的政审吗？";

std::filesystem::path temp_file(const std::string& stem) {
  static int counter = 0;
  return std::filesystem::temp_directory_path() /
         (stem + "_" + std::to_string(::getpid()) + "_" +
          std::to_string(counter++) + ".jsonl");
}

AppConfig service_config() {
  AppConfig cfg;
  cfg.backend_mode = "scripted";
  cfg.orchestrator.max_iterations = 5;
  cfg.orchestrator.top_k_statutes = 3;
  cfg.orchestrator.test_mode = true;
  cfg.trace_path.clear();  // in-memory store unless a test opts in
  cfg.bind_address = "127.0.0.1";
  cfg.port = 0;  // ephemeral
  return cfg;
}

std::shared_ptr<const StatuteIndex> fixture_index() {
  return std::make_shared<const StatuteIndex>(
      StatuteIndex::build(load_corpus(kFixtureDir + "/statutes.jsonl")));
}

std::shared_ptr<ChatBackend> fixture_backend() {
  return std::make_shared<ScriptedBackend>(
      load_scenario(kFixtureDir + "/scenario_full.json"));
}

OrchestrationTrace sample_trace(const std::string& id) {
  OrchestrationTrace t;
  t.trace_id = id;
  t.query_id = "q-" + id;
  t.add_step("manager", "decision=Pass", "aa", "bb", 0.0);
  return t;
}

}  // namespace

TEST_CASE("the trace store looks up what it was given") {
  TraceStore store;  // memory-only
  CHECK(store.size() == 0);
  CHECK_FALSE(store.get("absent").has_value());
  store.put(sample_trace("0123abcd"));
  store.put(sample_trace("4567ef01"));
  CHECK(store.size() == 2);
  const auto got = store.get("0123abcd");
  REQUIRE(got.has_value());
  CHECK(got->query_id == "q-0123abcd");
  REQUIRE(got->steps.size() == 1);
  CHECK(got->steps[0].label == "decision=Pass");
}

TEST_CASE("a file-backed store appends one parseable line per trace") {
  const auto path = temp_file("trace_store");
  {
    TraceStore store(path);
    store.put(sample_trace("1111aaaa"));
    // The line must be on disk before put() returns.
    std::ifstream peek(path);
    std::string line;
    REQUIRE(std::getline(peek, line));
    CHECK(trace_from_json(line).trace_id == "1111aaaa");
    store.put(sample_trace("2222bbbb"));
  }
  std::ifstream f(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) lines.push_back(line);
  REQUIRE(lines.size() == 2);
  CHECK(trace_from_json(lines[0]).trace_id == "1111aaaa");
  CHECK(trace_from_json(lines[1]).trace_id == "2222bbbb");
  std::filesystem::remove(path);
}

TEST_CASE("the consultation service answers over HTTP") {
  const auto trace_file = temp_file("service_traces");
  AppConfig cfg = service_config();
  cfg.trace_path = trace_file;
  ConsultService service(cfg, fixture_backend(), fixture_index());
  const int port = service.start();
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  SUBCASE("health endpoint reports the loaded corpus") {
    const auto res = client.Get("/healthz");
    REQUIRE(res);
    CHECK(res->status == 200);
    const json body = json::parse(res->body);
    CHECK(body.at("status") == "ok");
    CHECK(body.at("index_doc_count") == 8);
  }

  SUBCASE("a consultation returns the opinion and persists its trace first") {
    const json req{{"question", kQuestion}, {"id", "q-http"}};
    const auto res = client.Post("/consult", req.dump(), "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    const json body = json::parse(res->body);
    CHECK_FALSE(body.at("response").get<std::string>().empty());
    REQUIRE(body.at("legal_basis").is_array());
    REQUIRE(body.at("legal_basis").size() == 1);
    CHECK(body.at("legal_basis")[0].at("law_name") == "中华人民共和国刑法");
    const std::string trace_id = body.at("trace_id").get<std::string>();
    CHECK(trace_id.size() == 16);

    // In-memory lookup, HTTP lookup, and the JSONL file must all agree.
    const auto stored = service.traces().get(trace_id);
    REQUIRE(stored.has_value());
    CHECK(stored->steps.size() == 9);
    CHECK(stored->query_id == "q-http");

    const auto fetched = client.Get(("/trace/" + trace_id).c_str());
    REQUIRE(fetched);
    CHECK(fetched->status == 200);
    CHECK(trace_from_json(fetched->body).steps.size() == 9);

    std::ifstream f(trace_file);
    std::string line;
    REQUIRE(std::getline(f, line));
    CHECK(trace_from_json(line).trace_id == trace_id);
  }

  SUBCASE("malformed consultation requests get 400") {
    for (const std::string body :
         {std::string("{not json"), json::object().dump(),
          json{{"question", 7}}.dump(), json{{"question", "   "}}.dump(),
          json::array().dump()}) {
    const auto res = client.Post("/consult", body, "application/json");
      REQUIRE(res);
      CHECK(res->status == 400);
      CHECK(json::parse(res->body).contains("error"));
    }
    CHECK(service.traces().size() == 0);  // nothing consulted, nothing stored
  }

  SUBCASE("unknown trace ids get 404") {
    const auto res = client.Get("/trace/deadbeef00000000");
    REQUIRE(res);
    CHECK(res->status == 404);
    const auto bad = client.Get("/trace/not-hex!");
    REQUIRE(bad);
    CHECK(bad->status == 404);
  }

  service.stop();
  std::filesystem::remove(trace_file);
}

TEST_CASE("pipeline failures return 502 with a retrievable partial trace") {
  AppConfig cfg = service_config();
  // An empty script exhausts on the very first agent call.
  auto backend = std::make_shared<ScriptedBackend>(ScriptedScenario{});
  ConsultService service(cfg, backend, fixture_index());
  const int port = service.start();
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  const json req{{"question", kQuestion}};
  const auto res = client.Post("/consult", req.dump(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 502);
  const json body = json::parse(res->body);
  CHECK(body.at("cause") == "script-exhausted");
  const std::string trace_id = body.at("trace_id").get<std::string>();

  const auto fetched = client.Get(("/trace/" + trace_id).c_str());
  REQUIRE(fetched);
  CHECK(fetched->status == 200);
  const OrchestrationTrace partial = trace_from_json(fetched->body);
  CHECK(partial.steps.empty());  // failed before any step completed
  service.stop();
}

TEST_CASE("a stopped service refuses new consultations") {
  AppConfig cfg = service_config();
  ConsultService service(cfg, fixture_backend(), fixture_index());
  service.stop();  // drain before the listener ever opens
  const int port = service.start();
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);

  const auto health = client.Get("/healthz");
  REQUIRE(health);
  CHECK(health->status == 200);  // liveness stays observable while draining

  const json req{{"question", kQuestion}};
  const auto res = client.Post("/consult", req.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 503);
  CHECK(service.traces().size() == 0);
  service.stop();
}

TEST_CASE("concurrent consultations each get their own stored trace") {
  constexpr int kClients = 8;
  // Identical replies per role make the outcome independent of interleaving.
  std::map<std::string, std::vector<std::string>> lists;
  const std::string graph = R"({"entities": [{"name": "咨询人", "type": "自然人",
    "attributes": {}}], "events": [], "relationships": [], "user_claims": [],
    "key_facts": ["事实"], "legal_questions": ["问题"]})";
  for (int i = 0; i < kClients; ++i) {
    lists["element"].push_back(graph);
    lists["draft"].push_back("草稿。");
    lists["manager"].push_back("Pass");
    lists["content_check"].push_back(
        "Response:\n答复。\nLegal Basis:\n《中华人民共和国刑法》第十二条");
  }
  auto backend = std::make_shared<ScriptedBackend>(
      ScriptedScenario::from_role_lists(lists));

  AppConfig cfg = service_config();
  ConsultService service(cfg, backend, fixture_index());
  const int port = service.start();
  REQUIRE(port > 0);

  std::vector<std::thread> threads;
  std::vector<int> statuses(kClients, 0);
  std::vector<std::string> ids(kClients);
  for (int i = 0; i < kClients; ++i) {
    threads.emplace_back([&, i] {
      httplib::Client client("127.0.0.1", port);
      const json req{{"question", "问题" + std::to_string(i)}};
      const auto res = client.Post("/consult", req.dump(), "application/json");
      if (res) {
        statuses[i] = res->status;
        if (res->status == 200) {
          ids[i] = json::parse(res->body).at("trace_id").get<std::string>();
        }
      }
    });
  }
  for (auto& t : threads) t.join();

  std::set<std::string> unique_ids;
  for (int i = 0; i < kClients; ++i) {
    CHECK(statuses[i] == 200);
    unique_ids.insert(ids[i]);
  }
  CHECK(unique_ids.size() == static_cast<std::size_t>(kClients));
  CHECK(service.traces().size() == static_cast<std::size_t>(kClients));
  for (const std::string& id : unique_ids) {
    const auto t = service.traces().get(id);
    REQUIRE(t.has_value());
    CHECK(t->steps.size() == 4);  // extract, draft, Pass, final check
    CHECK(t->terminal_reason == TerminalReason::pass);
  }
  service.stop();
}
