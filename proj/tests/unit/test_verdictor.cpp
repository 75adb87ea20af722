#include <doctest.h>

#include "aigt/verdictor.hpp"
#include "stub_server.hpp"

using namespace aigt;
using namespace aigt::verdictor;
using teacher::TemplateKind;

namespace {

corpus::LabeledText rec(std::string id, Authorship label, std::string text) {
  corpus::LabeledText t;
  t.id = std::move(id);
  t.text = std::move(text);
  t.label = label;
  if (label == Authorship::Ai) t.generator = "g";
  return t;
}

lm::EndpointConfig chat_at(const std::string& url) {
  lm::EndpointConfig e;
  e.base_url = url;
  e.model_name = "toy";
  e.capability = lm::Capability::Chat;
  e.max_attempts = 2;
  e.backoff_initial = std::chrono::milliseconds(1);
  e.timeout = std::chrono::milliseconds(500);
  return e;
}

}  // namespace

TEST_CASE("completions are classified as verdict, format error or no answer") {
  auto v = classify_completion("a", R"({"rationale": "r", "verdict": "AI"})", TemplateKind::Balanced);
  CHECK(v.kind == OutcomeKind::Verdict);
  CHECK(v.parsed->verdict == Authorship::Ai);
  CHECK(v.mode == Mode::Cot);

  v = classify_completion("b", R"({"rationale": "so it is HUMAN)", TemplateKind::Balanced);
  CHECK(v.kind == OutcomeKind::FormatError);
  CHECK(v.fallback_answer() == Authorship::Human);

  v = classify_completion("c", R"({"rationale": "unsure", "verdict": "BOTH"})", TemplateKind::Balanced);
  CHECK(v.kind == OutcomeKind::NoAnswer);
  CHECK_FALSE(v.fallback_answer());

  v = classify_completion("d", R"({"rationale": "unsure"})", TemplateKind::Balanced);
  CHECK(v.kind == OutcomeKind::NoAnswer);

  v = classify_completion("e", "", TemplateKind::NonCot);
  CHECK(v.kind == OutcomeKind::FormatError);
  CHECK(v.mode == Mode::NonCot);
  CHECK_FALSE(v.fallback_answer());
}

TEST_CASE("fallback answer is the last standalone label token") {
  CHECK(fallback_final_answer("AI at first, then HUMAN") == Authorship::Human);
  CHECK(fallback_final_answer("HUMAN, no: AI.") == Authorship::Ai);
  CHECK_FALSE(fallback_final_answer("HUMANLIKE and RAIN and AIx"));
  CHECK_FALSE(fallback_final_answer("human ai"));
  CHECK(fallback_final_answer("\"AI\"") == Authorship::Ai);
}

TEST_CASE("FER and UAR over a constructed batch") {
  std::vector<DetectionVerdict> vs;
  std::vector<corpus::LabeledText> golds;
  auto add = [&](std::string raw, Authorship gold) {
    const auto id = "i" + std::to_string(vs.size());
    vs.push_back(classify_completion(id, std::move(raw), TemplateKind::Balanced));
    golds.push_back(rec(id, gold, "t"));
  };
  for (int i = 0; i < 6; ++i) add(R"({"rationale": "r", "verdict": "AI"})", i < 4 ? Authorship::Ai : Authorship::Human);
  add(R"({"rationale": "no closing, AI)", Authorship::Ai);  // structural, answered
  add(R"({"rationale": "no closing)", Authorship::Ai);      // structural, answerless
  add(R"({"rationale": "r", "verdict": "?"})", Authorship::Ai);
  DetectionVerdict failed;
  failed.id = "tf";
  failed.error = "down";
  vs.push_back(failed);
  golds.push_back(rec("tf", Authorship::Ai, "t"));

  const auto s = batch_stats(vs, golds);
  CHECK(s.total == 10);
  CHECK(s.evaluated() == 9);
  CHECK(s.verdicts == 6);
  CHECK(s.correct == 4);
  CHECK(s.accuracy() == Rate{4, 6});
  CHECK(s.fer() == Rate{2, 9});
  CHECK(s.uar() == Rate{2, 9});
  CHECK(s.structural_answered == 1);
  CHECK(s.structural_answerless == 1);
  CHECK(s.intact_answerless == 1);
  const auto j = to_json(s);
  CHECK(j.at("counts").at("TRANSPORT_FAILED") == 1);

  golds.pop_back();
  CHECK_THROWS_AS(batch_stats(vs, golds), ConfigError);
}

TEST_CASE("an all-failed batch has undefined rates") {
  std::vector<DetectionVerdict> vs(3);
  std::vector<corpus::LabeledText> golds;
  for (int i = 0; i < 3; ++i) {
    vs[i].id = "x" + std::to_string(i);
    golds.push_back(rec(vs[i].id, Authorship::Human, "t"));
  }
  const auto s = batch_stats(vs, golds);
  CHECK(s.evaluated() == 0);
  CHECK_FALSE(s.fer().value());
  CHECK_FALSE(s.uar().value());
  CHECK(s.accuracy().fixed(3) == "—");
}

TEST_CASE("persisted verdicts are re-graded from the raw completion") {
  const auto v = classify_completion("a", R"({"rationale": "r", "verdict": "human"})", TemplateKind::Balanced);
  const auto j = to_json(v);
  CHECK(j.at("outcome") == "VERDICT");
  CHECK(j.at("normalized") == true);
  const auto back = verdict_from_json(j, TemplateKind::Balanced);
  CHECK(back.kind == OutcomeKind::Verdict);
  CHECK(back.parsed->verdict == Authorship::Human);
  // the same completion graded under NON_COT fails on the extra field
  CHECK(verdict_from_json(j, TemplateKind::NonCot).kind == OutcomeKind::FormatError);

  DetectionVerdict tf;
  tf.id = "z";
  tf.error = "timeout";
  const auto tj = to_json(tf);
  CHECK(tj.at("outcome") == "TRANSPORT_FAILED");
  CHECK(verdict_from_json(tj, TemplateKind::Balanced).kind == OutcomeKind::TransportFailed);
}

TEST_CASE("detect against the stub, then with the endpoint gone") {
  toy::StubServer server;
  lm::Client client;
  const auto chat = chat_at(server.url());
  std::vector<corpus::LabeledText> batch{rec("v", Authorship::Ai, "an apple is on every old oak"),
                                         rec("c", Authorship::Human, "my dog barks loudly at night"),
                                         rec("s", Authorship::Human, "scripted passage")};
  server.script("scripted passage", "I think HUMAN");
  const auto tmpl = teacher::PromptTemplate::builtin(TemplateKind::Balanced);
  const auto vs = detect_batch(client, chat, batch, tmpl);
  REQUIRE(vs.size() == 3);
  CHECK(vs[0].kind == OutcomeKind::Verdict);
  CHECK(vs[0].parsed->verdict == Authorship::Ai);
  CHECK_FALSE(vs[0].parsed->rationale.empty());
  CHECK(vs[1].parsed->verdict == Authorship::Human);
  CHECK(vs[2].kind == OutcomeKind::FormatError);
  CHECK(vs[2].fallback_answer() == Authorship::Human);

  const auto nc = detect(client, chat, batch[0], teacher::PromptTemplate::builtin(TemplateKind::NonCot));
  CHECK(nc.kind == OutcomeKind::Verdict);
  CHECK(nc.parsed->rationale.empty());

  server.stop();
  const auto down = detect_batch(client, chat, batch, tmpl);
  for (const auto& v : down) CHECK(v.kind == OutcomeKind::TransportFailed);
  const auto s = batch_stats(down, batch);
  CHECK(s.transport_failed == 3);
}
