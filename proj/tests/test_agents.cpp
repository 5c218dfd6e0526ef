#include <map>
#include <string>
#include <vector>

#include "counsel/agents.hpp"
#include "counsel/llm_backend.hpp"
#include "counsel/prompts.hpp"
#include "counsel/statute_index.hpp"
#include "counsel/trace.hpp"
#include "doctest.h"

using namespace counsel;

namespace {

StatuteIndex demo_index() {
  return StatuteIndex::build({
      {"中华人民共和国刑法", "第一百三十三条之一",
       "在道路上驾驶机动车，醉酒驾驶机动车的，处拘役，并处罚金。"},
      {"中华人民共和国道路交通安全法", "第九十一条",
       "饮酒后驾驶机动车的，处暂扣六个月机动车驾驶证。"},
      {"中华人民共和国民法典", "第五百七十七条",
       "当事人一方不履行合同义务的，应当承担违约责任。"},
  });
}

using RoleLists = std::map<std::string, std::vector<std::string>>;

struct Harness {
  explicit Harness(const RoleLists& lists)
      : backend(ScriptedScenario::from_role_lists(lists)),
        prompts(PromptSet::builtin()),
        ctx{backend, prompts, &trace, {}, true} {
    trace.trace_id = "t";
    trace.query_id = "q";
    trace.freeze_time = true;
  }

  ScriptedBackend backend;
  PromptSet prompts;
  OrchestrationTrace trace;
  AgentContext ctx;
};

ConsultationQuery demo_query() {
  ConsultationQuery q;
  q.id = "q-1";
  q.text = "我2011年醉驾被判拘役，孩子报考航空学校政审会受影响吗？";
  return q;
}

Draft demo_draft() {
  Draft d;
  d.text = "您的犯罪记录可能影响孩子的政审，建议提前咨询院校。";
  d.iteration = 0;
  return d;
}

const std::string kValidGraphReply = R"({
  "entities": [{"name": "咨询人", "type": "自然人", "attributes": {}}],
  "events": [],
  "relationships": [],
  "user_claims": [],
  "key_facts": ["2011年醉驾被判拘役"],
  "legal_questions": ["犯罪记录是否影响子女政审"]
})";

}  // namespace

TEST_CASE("decision detection is token-based and case-insensitive") {
  CHECK(detect_decision("Pass") == DecisionKind::Pass);
  CHECK(detect_decision("  PASS，无需修改 ") == DecisionKind::Pass);
  CHECK(detect_decision("Call: FormatCheckAgent") == DecisionKind::FormatCheck);
  CHECK(detect_decision("call: lawsearchagent now") == DecisionKind::LawSearch);
  CHECK(detect_decision("需要 FormatCheckAgent 和 LawSearchAgent") ==
        DecisionKind::Both);
  // Repair tokens beat a stray "pass" in the same reply.
  CHECK(detect_decision("pass? no — call FormatCheckAgent") ==
        DecisionKind::FormatCheck);
  CHECK_FALSE(detect_decision("我不知道该怎么办").has_value());
  CHECK_FALSE(detect_decision("").has_value());
}

TEST_CASE("suggestion splitting strips list markers") {
  const auto items = split_suggestions(
      "1. 使用书面语气\n"
      "2) 补充时间线\n"
      "（3）删除口语词\n"
      "- 引用具体条文\n"
      "* 统一称谓\n"
      "• 核对数字\n"
      "\n"
      "最后一条没有标记");
  REQUIRE(items.size() == 7);
  CHECK(items[0] == "使用书面语气");
  CHECK(items[1] == "补充时间线");
  CHECK(items[2] == "删除口语词");
  CHECK(items[3] == "引用具体条文");
  CHECK(items[4] == "统一称谓");
  CHECK(items[5] == "核对数字");
  CHECK(items[6] == "最后一条没有标记");
  CHECK(split_suggestions("").empty());
  CHECK(split_suggestions("\n\n").empty());
}

TEST_CASE("search-term parsing splits, dedupes, and caps") {
  const auto terms = parse_search_terms("醉驾, 刑法；危险驾驶、醉驾\n政审");
  REQUIRE(terms.size() == 4);
  CHECK(terms[0] == "醉驾");
  CHECK(terms[1] == "刑法");
  CHECK(terms[2] == "危险驾驶");
  CHECK(terms[3] == "政审");

  const auto capped =
      parse_search_terms("a, b, c, d, e, f, g", /*max_terms=*/5);
  CHECK(capped.size() == 5);
  CHECK(parse_search_terms("- 醉驾\n- 刑法") ==
        std::vector<std::string>{"醉驾", "刑法"});
}

TEST_CASE("opinion section splitting accepts several heading styles") {
  SUBCASE("inline english labels") {
    const auto s = split_opinion_sections(
        "Response: 您好，可以。\nLegal Basis: 《民法典》第577条");
    REQUIRE(s.has_value());
    CHECK(s->response == "您好，可以。");
    CHECK(s->legal_basis == "《民法典》第577条");
  }
  SUBCASE("block chinese labels with fullwidth colon") {
    const auto s = split_opinion_sections(
        "回复：\n您好，可以主张违约责任。\n\n法律依据：\n《民法典》第577条\n《民法典》第716条");
    REQUIRE(s.has_value());
    CHECK(s->response == "您好，可以主张违约责任。");
    CHECK(s->legal_basis == "《民法典》第577条\n《民法典》第716条");
  }
  SUBCASE("markdown decorated headings") {
    const auto s = split_opinion_sections(
        "## Response\n内容第一行\n内容第二行\n## Legal Basis\n依据行");
    REQUIRE(s.has_value());
    CHECK(s->response == "内容第一行\n内容第二行");
    CHECK(s->legal_basis == "依据行");
  }
  SUBCASE("missing either section yields nothing") {
    CHECK_FALSE(split_opinion_sections("Response: 只有答复").has_value());
    CHECK_FALSE(split_opinion_sections("Legal Basis: 只有依据").has_value());
    CHECK_FALSE(split_opinion_sections("自由文本").has_value());
    // A labeled but empty response is as bad as a missing one.
    CHECK_FALSE(
        split_opinion_sections("Response:\nLegal Basis: 依据").has_value());
  }
}

TEST_CASE("element extraction parses a clean first reply") {
  Harness h(RoleLists{{"element", {kValidGraphReply}}});
  const ElementGraph g = extract_elements(demo_query(), h.ctx);
  CHECK(g.entities.size() == 1);
  CHECK(g.key_facts.size() == 1);
  REQUIRE(h.trace.steps.size() == 1);
  CHECK(h.trace.steps[0].agent_role == "element");
  CHECK(h.trace.steps[0].label == "extract");
  CHECK(h.trace.steps[0].warnings.empty());
  CHECK(h.trace.steps[0].duration_ms == 0.0);  // frozen clock
}

TEST_CASE("element extraction retries once and records the rejection") {
  Harness h(RoleLists{{"element", {"抱歉，我不明白。", kValidGraphReply}}});
  const ElementGraph g = extract_elements(demo_query(), h.ctx);
  CHECK(g.entities.size() == 1);
  CHECK(h.backend.call_log().size() == 2);
  REQUIRE(h.trace.steps.size() == 1);  // retry folds into the same step
  REQUIRE(h.trace.steps[0].warnings.size() == 1);
  CHECK(h.trace.steps[0].warnings[0].find("no-structured-payload") !=
        std::string::npos);
  // The corrective turn carries the expected shape.
  const auto log = h.backend.call_log();
  CHECK(log[1].message_count == 4);
}

TEST_CASE("element extraction fails closed after two bad replies") {
  Harness h(RoleLists{{"element", {"不是JSON", "还是不是JSON"}}});
  try {
    extract_elements(demo_query(), h.ctx);
    FAIL("expected ExtractionFailed");
  } catch (const ExtractionFailed& e) {
    CHECK(e.first_reply == "不是JSON");
    CHECK(e.second_reply == "还是不是JSON");
  }
  REQUIRE(h.trace.steps.size() == 1);
  CHECK(h.trace.steps[0].label == "extract-failed");
  CHECK(h.trace.steps[0].warnings.size() == 2);
}

TEST_CASE("initial drafting wraps the reply and rejects empties") {
  Harness h(RoleLists{{"draft", {"初稿内容。"}}});
  ElementGraph g;
  Entity e;
  e.name = "咨询人";
  g.entities.push_back(e);
  const EncodedPrompt prompt = encode_prompt(g, demo_query());
  const Draft d = draft_initial(prompt, h.ctx);
  CHECK(d.text == "初稿内容。");
  CHECK(d.iteration == 0);
  CHECK(d.applied_suggestions.empty());
  REQUIRE(h.trace.steps.size() == 1);
  CHECK(h.trace.steps[0].label == "initial");

  Harness empty(RoleLists{{"draft", {"   "}}});
  CHECK_THROWS_AS(draft_initial(prompt, empty.ctx), EmptyDraft);
  CHECK(empty.trace.steps.size() == 1);
  CHECK(empty.trace.steps[0].label == "initial-failed");
}

TEST_CASE("manager decisions record the parsed kind") {
  Harness h(RoleLists{{"manager", {"Call: LawSearchAgent"}}});
  const ManagerDecision d = manager_decide(demo_draft(), h.ctx);
  CHECK(d.kind == DecisionKind::LawSearch);
  CHECK(d.raw_text == "Call: LawSearchAgent");
  REQUIRE(h.trace.steps.size() == 1);
  CHECK(h.trace.steps[0].label == "decision=LawSearch");
}

TEST_CASE("an undecidable manager reply is retried then defaulted") {
  SUBCASE("retry succeeds") {
    Harness h(RoleLists{{"manager", {"嗯……", "Pass"}}});
    const ManagerDecision d = manager_decide(demo_draft(), h.ctx);
    CHECK(d.kind == DecisionKind::Pass);
    CHECK(h.backend.call_log().size() == 2);
    REQUIRE(h.trace.steps.size() == 1);
    CHECK(h.trace.steps[0].warnings.size() == 1);
  }
  SUBCASE("retry still undecidable") {
    Harness h(RoleLists{{"manager", {"嗯……", "（沉默）"}}});
    const ManagerDecision d = manager_decide(demo_draft(), h.ctx);
    CHECK(d.kind == DecisionKind::Pass);  // safe default
    REQUIRE(h.trace.steps.size() == 1);
    CHECK(h.trace.steps[0].warnings.size() == 2);
    CHECK(h.trace.steps[0].label == "decision=Pass");
  }
}

TEST_CASE("format checking returns split suggestions or fails loudly") {
  Harness h(RoleLists{{"format_check", {"1. 补充称谓\n2. 引用条文"}}});
  const Suggestions s = format_suggestions(demo_draft(), h.ctx);
  REQUIRE(s.items.size() == 2);
  CHECK(s.items[0] == "补充称谓");
  REQUIRE(h.trace.steps.size() == 1);
  CHECK(h.trace.steps[0].label == "suggestions=2");

  Harness empty(RoleLists{{"format_check", {"   \n  "}}});
  CHECK_THROWS_AS(format_suggestions(demo_draft(), empty.ctx), FormatCheckEmpty);
  REQUIRE(empty.trace.steps.size() == 1);
  CHECK(empty.trace.steps[0].label == "no-suggestions");
}

TEST_CASE("applying suggestions revises text and keeps history") {
  Harness h(RoleLists{{"draft", {"修改后的稿件。"}}});
  Suggestions s;
  s.items = {"补充称谓", "引用条文"};
  Draft before = demo_draft();
  before.iteration = 2;
  before.applied_suggestions = {"旧建议"};
  const Draft after = apply_suggestions(before, s, h.ctx);
  CHECK(after.text == "修改后的稿件。");
  CHECK(after.iteration == 2);  // iteration moves in the loop, not here
  CHECK(after.applied_suggestions ==
        std::vector<std::string>{"旧建议", "补充称谓", "引用条文"});
  REQUIRE(h.trace.steps.size() == 1);
  CHECK(h.trace.steps[0].agent_role == "apply");

  // A revision that changes nothing is flagged, not hidden.
  Harness same(RoleLists{{"draft", {demo_draft().text}}});
  const Draft unchanged = apply_suggestions(demo_draft(), s, same.ctx);
  CHECK(unchanged.text == demo_draft().text);
  REQUIRE(same.trace.steps.size() == 1);
  REQUIRE(same.trace.steps[0].warnings.size() == 1);

  Harness unused(RoleLists{{"draft", {"x"}}});
  Suggestions none;
  CHECK_THROWS_AS(apply_suggestions(demo_draft(), none, unused.ctx),
                  FormatCheckEmpty);
}

TEST_CASE("statute search merges per-term hits and keeps the global top k") {
  const StatuteIndex index = demo_index();
  Harness h(RoleLists{{"law_search", {"醉驾, 醉酒驾驶"}}});
  const StatuteList list =
      law_search(demo_query(), demo_draft(), index, 2, h.ctx);
  CHECK(list.query_terms == std::vector<std::string>{"醉驾", "醉酒驾驶"});
  REQUIRE_FALSE(list.items.empty());
  CHECK(list.items.size() <= 2);
  // Both terms hit the same articles; the merge keeps one entry each.
  for (std::size_t i = 0; i < list.items.size(); ++i) {
    for (std::size_t j = i + 1; j < list.items.size(); ++j) {
      CHECK(list.items[i].statute != list.items[j].statute);
    }
  }
  CHECK(list.items[0].statute.article_id == "第一百三十三条之一");
  REQUIRE(h.trace.steps.size() == 1);
  CHECK(h.trace.steps[0].label == "terms=醉驾|醉酒驾驶");
}

TEST_CASE("statute search falls back to the raw query when terms are unusable") {
  const StatuteIndex index = demo_index();
  Harness h(RoleLists{{"law_search", {""}}});
  const StatuteList list =
      law_search(demo_query(), demo_draft(), index, 3, h.ctx);
  CHECK(list.query_terms == std::vector<std::string>{demo_query().text});
  REQUIRE(h.trace.steps.size() == 1);
  REQUIRE_FALSE(h.trace.steps[0].warnings.empty());
  CHECK(h.trace.steps[0].warnings[0].find("fell back") != std::string::npos);
}

TEST_CASE("a term that tokenizes to nothing is skipped with a warning") {
  const StatuteIndex index = demo_index();
  Harness h(RoleLists{{"law_search", {"！！！, 醉驾"}}});
  const StatuteList list =
      law_search(demo_query(), demo_draft(), index, 3, h.ctx);
  REQUIRE_FALSE(list.items.empty());
  REQUIRE(h.trace.steps.size() == 1);
  REQUIRE(h.trace.steps[0].warnings.size() == 1);
  CHECK(h.trace.steps[0].warnings[0].find("no tokens") != std::string::npos);
}

TEST_CASE("statute search requires a populated index") {
  StatuteIndex empty;
  Harness h(RoleLists{{"law_search", {"醉驾"}}});
  CHECK_THROWS_AS(law_search(demo_query(), demo_draft(), empty, 3, h.ctx),
                  EmptyIndex);
}

TEST_CASE("integration accumulates statute ids with set semantics") {
  const StatuteIndex index = demo_index();
  Harness h(RoleLists{{"law_search", {"醉驾", "醉驾"}, },
             {"draft", {"引用条文后的稿件。", "再次引用后的稿件。"}}});
  const StatuteList list =
      law_search(demo_query(), demo_draft(), index, 2, h.ctx);
  const Draft once = integrate_statutes(demo_draft(), list, h.ctx);
  CHECK(once.text == "引用条文后的稿件。");
  CHECK(once.integrated_statute_ids.size() == list.items.size());

  const StatuteList list2 =
      law_search(demo_query(), once, index, 2, h.ctx);
  const Draft twice = integrate_statutes(once, list2, h.ctx);
  CHECK(twice.integrated_statute_ids == once.integrated_statute_ids);

  Harness unused(RoleLists{{"draft", {"x"}}});
  StatuteList none;
  CHECK_THROWS_AS(integrate_statutes(demo_draft(), none, unused.ctx), Error);
}

TEST_CASE("content check resolves citations to canonical articles") {
  const StatuteIndex index = demo_index();
  Harness h(RoleLists{{"content_check",
              {"Response:\n您好，醉驾构成危险驾驶罪。\n\nLegal Basis:\n《刑法》第一百三十三条之一"}}});
  const LegalOpinion op =
      content_check(demo_query(), demo_draft(), &index, h.ctx);
  CHECK(op.response == "您好，醉驾构成危险驾驶罪。");
  CHECK(op.source_query_id == "q-1");
  REQUIRE(op.legal_basis.size() == 1);
  CHECK(op.legal_basis[0].law_name == "中华人民共和国刑法");  // canonical
  CHECK(op.legal_basis[0].article_id == "第一百三十三条之一");
  CHECK(op.legal_basis[0].text.find("醉酒驾驶机动车") != std::string::npos);
  REQUIRE(h.trace.steps.size() == 1);
  CHECK(h.trace.steps[0].label == "citations=1");
}

TEST_CASE("content check keeps unresolved citations verbatim") {
  const StatuteIndex index = demo_index();
  Harness h(RoleLists{{"content_check",
              {"Response:\n答复。\nLegal Basis:\n《不存在法》第9条 相关说明文字"}}});
  const LegalOpinion op =
      content_check(demo_query(), demo_draft(), &index, h.ctx);
  REQUIRE(op.legal_basis.size() == 1);
  CHECK(op.legal_basis[0].law_name == "不存在法");
  CHECK(op.legal_basis[0].article_id == "第9条");
  CHECK(op.legal_basis[0].text == "相关说明文字");
}

TEST_CASE("content check accepts a free-form legal basis") {
  Harness h(RoleLists{{"content_check",
              {"Response:\n答复。\nLegal Basis:\n依照现行有效的法律规定办理。"}}});
  const LegalOpinion op =
      content_check(demo_query(), demo_draft(), nullptr, h.ctx);
  REQUIRE(op.legal_basis.size() == 1);
  CHECK(op.legal_basis[0].law_name.empty());
  CHECK(op.legal_basis[0].article_id.empty());
  CHECK(op.legal_basis[0].text == "依照现行有效的法律规定办理。");
}

TEST_CASE("content check retries a sectionless reply then fails typed") {
  SUBCASE("retry rescues") {
    Harness h(RoleLists{{"content_check",
                {"就是这样。",
                 "Response:\n答复。\nLegal Basis:\n《民法典》第五百七十七条"}}});
    const StatuteIndex index = demo_index();
    const LegalOpinion op =
        content_check(demo_query(), demo_draft(), &index, h.ctx);
    CHECK(op.response == "答复。");
    CHECK(h.backend.call_log().size() == 2);
    REQUIRE(h.trace.steps.size() == 1);
    CHECK(h.trace.steps[0].warnings.size() == 1);
  }
  SUBCASE("both replies unusable") {
    Harness h(RoleLists{{"content_check", {"自由文本一", "自由文本二"}}});
    try {
      content_check(demo_query(), demo_draft(), nullptr, h.ctx);
      FAIL("expected SectionMissing");
    } catch (const SectionMissing& e) {
      CHECK(e.which == "response");
    }
    REQUIRE(h.trace.steps.size() == 1);
    CHECK(h.trace.steps[0].label == "sections-missing");
  }
}

TEST_CASE("trace steps accumulate with consecutive indices") {
  Harness h(RoleLists{{"manager", {"Pass", "Pass"}},
             {"format_check", {"1. 建议"}}});
  manager_decide(demo_draft(), h.ctx);
  format_suggestions(demo_draft(), h.ctx);
  manager_decide(demo_draft(), h.ctx);
  REQUIRE(h.trace.steps.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(h.trace.steps[i].index == i);
  CHECK(h.trace.steps[0].agent_role == "manager");
  CHECK(h.trace.steps[1].agent_role == "format_check");
}
