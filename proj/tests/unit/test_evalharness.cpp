#include <doctest.h>

#include <cmath>

#include "aigt/evalharness.hpp"
#include "oracles.hpp"
#include "random_data.hpp"

using namespace aigt;
using namespace aigt::eval;

namespace {

std::uint64_t accuracy_num(const std::vector<ScoredInstance>& xs, Scope scope) {
  const auto cfg = oracle_threshold(xs, scope);
  std::uint64_t c = 0;
  for (const auto& f : cfg.fits) c += f.second.correct;
  return c;
}

}  // namespace

TEST_CASE("candidate thresholds sit between distinct neighbours") {
  const std::vector<double> s{3.0, 1.0, 1.0, 2.0};
  const auto c = candidate_thresholds(s);
  REQUIRE(c.size() == 4);
  CHECK(std::isinf(c.front()));
  CHECK(c[1] == 1.5);
  CHECK(c[2] == 2.5);
  CHECK(std::isinf(c.back()));
  // adjacent doubles: the midpoint collapses onto the upper value
  const double a = 1.0, b = std::nextafter(1.0, 2.0);
  const std::vector<double> tight{a, b};
  const auto t = candidate_thresholds(tight);
  CHECK(t[1] > a);
  CHECK(t[1] <= b);
}

TEST_CASE("fit prefers the smallest tau, then GE, on ties") {
  const std::vector<double> s{1.0, 2.0};
  const std::vector<Authorship> all_ai{Authorship::Ai, Authorship::Ai};
  const auto f = fit_threshold(s, all_ai);
  CHECK(f.correct == 2);
  CHECK(std::isinf(f.rule.tau));
  CHECK(f.rule.tau < 0);
  CHECK(f.rule.direction == Direction::Ge);

  const std::vector<Authorship> split{Authorship::Ai, Authorship::Human};
  const auto g = fit_threshold(s, split);
  CHECK(g.correct == 2);
  CHECK(g.rule.direction == Direction::Lt);
  CHECK(g.rule.tau == 1.5);
  const auto pinned = fit_threshold(s, split, Direction::Ge);
  CHECK(pinned.correct == 1);
  CHECK(pinned.rule.direction == Direction::Ge);

  CHECK_THROWS_AS(fit_threshold({}, {}), PreconditionError);
  const std::vector<double> bad{NAN};
  const std::vector<Authorship> one{Authorship::Ai};
  CHECK_THROWS_AS(fit_threshold(bad, one), PreconditionError);
}

TEST_CASE("fit_threshold equals exhaustive search and its rule achieves the count") {
  Rng rng(101);
  for (int trial = 0; trial < 150; ++trial) {
    const auto xs = testing::random_scored(rng, 1 + rng.bounded(300), 1);
    const auto s = testing::scores_of(xs);
    const auto g = testing::golds_of(xs);
    const auto f = fit_threshold(s, g);
    CHECK(f.correct == oracle::best_correct(s, g));
    std::uint64_t got = 0;
    for (std::size_t i = 0; i < s.size(); ++i) got += f.rule.predicts_ai(s[i]) == (g[i] == Authorship::Ai);
    CHECK(got == f.correct);
  }
}

TEST_CASE("per-domain accuracy dominates global accuracy") {
  Rng rng(55);
  for (int trial = 0; trial < 60; ++trial) {
    const auto xs = testing::random_scored(rng, 2 + rng.bounded(250), 1 + rng.bounded(5));
    CHECK(accuracy_num(xs, Scope::PerDomain) >= accuracy_num(xs, Scope::Global));
  }
}

TEST_CASE("strictly increasing transforms leave oracle accuracy unchanged") {
  Rng rng(77);
  for (int trial = 0; trial < 60; ++trial) {
    auto xs = testing::random_scored(rng, 2 + rng.bounded(200), 3);
    const auto base_g = accuracy_num(xs, Scope::Global);
    const auto base_d = accuracy_num(xs, Scope::PerDomain);
    for (int t = 0; t < 3; ++t) {
      auto ys = xs;
      for (auto& y : ys) y.score = t == 0 ? std::exp(y.score) : t == 1 ? 3 * y.score + 7 : y.score * y.score * y.score;
      CHECK(accuracy_num(ys, Scope::Global) == base_g);
      CHECK(accuracy_num(ys, Scope::PerDomain) == base_d);
    }
  }
}

TEST_CASE("confusion metrics are exact fractions") {
  Confusion c{955, 50, 950, 45};
  CHECK(c.fpr() == Rate{50, 1000});
  CHECK(c.tpr() == Rate{955, 1000});
  CHECK(c.accuracy() == Rate{1905, 2000});
  CHECK(c.fpr().fixed(3) == "0.050");
  CHECK(c.tpr().fixed(3) == "0.955");
  CHECK(c.accuracy().fixed(3) == "0.953");
  CHECK(confusion_from_json(to_json(c)) == c);
  Confusion none;
  CHECK_FALSE(none.accuracy().defined());
}

TEST_CASE("evaluation splits by domain and by length bucket") {
  std::vector<ScoredInstance> xs{
      {"a", "news", Authorship::Ai, 2.0, 100}, {"b", "news", Authorship::Human, 0.0, 200},
      {"c", "wiki", Authorship::Ai, 0.5, 500}, {"d", "wiki", Authorship::Human, 1.5, 700},
  };
  const auto global = oracle_threshold(xs, Scope::Global);
  const auto per = oracle_threshold(xs, Scope::PerDomain);
  CHECK(per.thresholds.size() == 2);
  const auto rg = evaluate(xs, global);
  const auto rp = evaluate(xs, per);
  CHECK(rp.overall.accuracy() == Rate{4, 4});
  CHECK(exact_less(rg.overall.accuracy(), rp.overall.accuracy()));
  CHECK(rp.per_domain.at("wiki").tp == 1);
  REQUIRE(rp.per_bucket.size() == 5);
  CHECK(rp.per_bucket[0].confusion.total() == 1);
  CHECK(rp.per_bucket[1].confusion.total() == 1);
  CHECK(rp.per_bucket[3].confusion.total() == 1);
  CHECK(rp.per_bucket[4].confusion.total() == 1);

  const auto back = threshold_config_from_json(to_json(per));
  CHECK(back.scope == Scope::PerDomain);
  CHECK(back.rule_for("wiki").tau == per.rule_for("wiki").tau);
  CHECK(back.rule_for("wiki").direction == per.rule_for("wiki").direction);
  CHECK(threshold_config_from_json(to_json(global)).rule_for("anything").tau == global.rule_for("x").tau);
  CHECK_THROWS_AS(per.rule_for("forum"), ConfigError);

  const auto er = eval_report_from_json(to_json(rp));
  CHECK(er.overall == rp.overall);
  CHECK(er.per_domain.at("news") == rp.per_domain.at("news"));
}

TEST_CASE("pinning keeps per-domain rules in the global direction") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto xs = testing::random_scored(rng, 20 + rng.bounded(100), 3);
    const auto g = oracle_threshold(xs, Scope::Global);
    const auto p = oracle_threshold(xs, Scope::PerDomain, true);
    for (const auto& [d, r] : p.thresholds) CHECK(r.direction == g.rule_for(d).direction);
  }
}

TEST_CASE("tune_all serial and parallel agree") {
  Rng rng(3);
  std::map<std::string, std::vector<ScoredInstance>> m;
  for (int i = 0; i < 6; ++i) m["s" + std::to_string(i)] = testing::random_scored(rng, 400, 4);
  for (auto scope : {Scope::Global, Scope::PerDomain}) {
    const auto a = tune_all(m, scope, false, Exec::Serial);
    const auto b = tune_all(m, scope, false, Exec::Parallel);
    for (const auto& [k, v] : a) CHECK(to_json(v) == to_json(b.at(k)));
  }
}

TEST_CASE("comparison marks ties as best and second only with three rows") {
  auto report = [](std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
    EvalReport r;
    r.overall = Confusion{tp, fp, tn, fn};
    r.per_domain["d"] = r.overall;
    return r;
  };
  std::vector<std::pair<std::string, EvalReport>> two{{"a", report(9, 1, 9, 1)}, {"b", report(8, 2, 8, 2)}};
  auto t = compare_reports(two);
  REQUIRE(t.columns == std::vector<std::string>{"d", "Acc", "FPR", "TPR"});
  CHECK(t.marks[0][1] == Mark::Best);
  CHECK(t.marks[1][1] == Mark::None);
  CHECK(t.marks[0][2] == Mark::Best);  // lower FPR wins

  std::vector<std::pair<std::string, EvalReport>> three{
      {"a", report(9, 1, 9, 1)}, {"b", report(9, 1, 9, 1)}, {"c", report(8, 2, 8, 2)}};
  t = compare_reports(three);
  CHECK(t.marks[0][1] == Mark::Best);
  CHECK(t.marks[1][1] == Mark::Best);
  CHECK(t.marks[2][1] == Mark::Second);
  const auto md = t.markdown();
  CHECK(md.find("**0.900**") != std::string::npos);
  CHECK(md.find("<u>0.800</u>") != std::string::npos);
  CHECK(t.csv().find("a,") != std::string::npos);
}
