#include <doctest.h>

#include <map>

#include "aigt/filterkit.hpp"
#include "aigt/json_io.hpp"
#include "aigt/rng.hpp"

using namespace aigt;
using namespace aigt::filterkit;

namespace {

corpus::LabeledText rec(std::string id, Authorship label) {
  corpus::LabeledText t;
  t.id = std::move(id);
  t.text = "text of " + t.id;
  t.label = label;
  if (label == Authorship::Ai) t.generator = "g";
  return t;
}

teacher::ParseResult said(Authorship v) {
  return teacher::ParsedRationale{"because", v, "{}", false};
}

teacher::ParseResult broken() { return teacher::ParseFailure{teacher::FailureKind::Incomplete, "eof", ""}; }

}  // namespace

TEST_CASE("categories follow the parsed verdict against gold") {
  CHECK(categorize(rec("a", Authorship::Ai), said(Authorship::Ai)).category == Category::Retained);
  CHECK(categorize(rec("a", Authorship::Ai), said(Authorship::Human)).category == Category::WrongPrediction);
  const auto p = categorize(rec("a", Authorship::Human), broken());
  CHECK(p.category == Category::ParseError);
  CHECK(p.failure->kind == teacher::FailureKind::Incomplete);
  CHECK_FALSE(p.parsed);
}

TEST_CASE("shipped fixtures fall into one retained, one wrong, four parse errors") {
  std::map<std::string, corpus::LabeledText> gold;
  for (auto& r : corpus::load_corpus(std::string(AIGT_SOURCE_DIR) + "/data/fixtures/filter_examples/texts.jsonl").records) {
    gold[r.id] = r;
  }
  std::map<Category, int> counts;
  for (const auto& j : read_jsonl_strict(std::string(AIGT_SOURCE_DIR) + "/data/fixtures/filter_examples/completions.jsonl")) {
    const auto id = j.at("id").get<std::string>();
    const auto o = categorize(gold.at(id), teacher::parse_strict(j.at("completion").get<std::string>(),
                                                                 teacher::TemplateKind::Balanced));
    counts[o.category]++;
    if (id == "correct_prediction") CHECK(o.category == Category::Retained);
    if (id == "wrong_prediction") CHECK(o.category == Category::WrongPrediction);
  }
  CHECK(counts[Category::Retained] == 1);
  CHECK(counts[Category::WrongPrediction] == 1);
  CHECK(counts[Category::ParseError] == 4);
}

TEST_CASE("3 retained, 1 wrong, 1 parse error with a pool of 5 gives 3 SFT and 7 GRPO") {
  std::vector<FilterOutcome> outs{
      categorize(rec("r1", Authorship::Ai), said(Authorship::Ai)),
      categorize(rec("r2", Authorship::Human), said(Authorship::Human)),
      categorize(rec("r3", Authorship::Ai), said(Authorship::Ai)),
      categorize(rec("w1", Authorship::Ai), said(Authorship::Human)),
      categorize(rec("p1", Authorship::Human), broken()),
  };
  std::vector<corpus::LabeledText> pool;
  for (int i = 0; i < 5; ++i) pool.push_back(rec("pool" + std::to_string(i), Authorship::Human));
  const auto d = build_datasets(outs, pool);
  REQUIRE(d.sft.size() == 3);
  REQUIRE(d.grpo.size() == 7);
  for (const auto& s : d.sft) {
    CHECK(s.rationale == "because");
    const auto r = to_record(s);
    CHECK(r.rationale == "because");
  }
  std::map<GrpoOrigin, int> origin;
  for (const auto& g : d.grpo) {
    origin[g.origin]++;
    CHECK_FALSE(g.source.rationale);
    CHECK_FALSE(to_record(g).rationale);
  }
  CHECK(origin[GrpoOrigin::WrongPrediction] == 1);
  CHECK(origin[GrpoOrigin::ParseError] == 1);
  CHECK(origin[GrpoOrigin::Pool] == 5);
  for (std::size_t i = 1; i < d.grpo.size(); ++i) CHECK(d.grpo[i - 1].source.id < d.grpo[i].source.id);
  // the wrong prediction keeps its gold label
  for (const auto& g : d.grpo) {
    if (g.source.id == "w1") CHECK(g.source.label == Authorship::Ai);
  }
  CHECK(d.report.prompted() == 5);
  CHECK(d.report.sft_size == 3);
  CHECK(d.report.grpo_size == 7);
  CHECK(d.report.parse_error_kinds.at("INCOMPLETE") == 1);
  const auto j = to_json(d.report);
  CHECK(j.at("counts").at("RETAINED") == 3);
  CHECK(j.at("proportions").at("RETAINED").at("fixed3") == "0.600");
}

TEST_CASE("an id in both outcomes and pool is a configuration error") {
  std::vector<FilterOutcome> outs{categorize(rec("x", Authorship::Ai), said(Authorship::Ai))};
  std::vector<corpus::LabeledText> pool{rec("x", Authorship::Ai)};
  CHECK_THROWS_AS(build_datasets(outs, pool), ConfigError);
  std::vector<FilterOutcome> dup{outs[0], outs[0]};
  CHECK_THROWS_AS(build_datasets(dup, {}), ConfigError);
}

TEST_CASE("category shares over random batches sum to one exactly") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<FilterOutcome> outs;
    const auto n = 1 + rng.bounded(50);
    std::size_t r = 0, w = 0, p = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto gold = rng.bounded(2) ? Authorship::Ai : Authorship::Human;
      const auto pick = rng.bounded(3);
      auto t = rec("i" + std::to_string(i), gold);
      if (pick == 0) {
        outs.push_back(categorize(t, said(gold)));
        ++r;
      } else if (pick == 1) {
        outs.push_back(categorize(t, said(gold == Authorship::Ai ? Authorship::Human : Authorship::Ai)));
        ++w;
      } else {
        outs.push_back(categorize(t, broken()));
        ++p;
      }
    }
    const auto d = build_datasets(outs, {});
    CHECK(d.report.retained == r);
    CHECK(d.report.wrong_prediction == w);
    CHECK(d.report.parse_error == p);
    CHECK(d.sft.size() + d.grpo.size() == n);
    CHECK(d.report.retained + d.report.wrong_prediction + d.report.parse_error == d.report.prompted());
  }
}
