// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "aigt/diagnostics.hpp"
#include "aigt/evalharness.hpp"
#include "aigt/filterkit.hpp"
#include "aigt/json_io.hpp"
#include "aigt/rng.hpp"
#include "aigt/scorers.hpp"
#include "aigt/trainmath.hpp"
#include "aigt/verdictor.hpp"
#include "cli_harness.hpp"
#include "oracles.hpp"
#include "random_data.hpp"
#include "stub_server.hpp"
#include "temp_dir.hpp"

using namespace aigt;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(std::string why) {
    if (pass) detail = std::move(why);
    pass = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------

Outcome parser_fixtures() {
  Outcome o;
  const auto t0 = Clock::now();
  const std::string dir = std::string(AIGT_SOURCE_DIR) + "/data/fixtures/filter_examples/";
  std::map<std::string, corpus::LabeledText> gold;
  for (auto& r : corpus::load_corpus(dir + "texts.jsonl").records) gold[r.id] = r;
  const std::map<std::string, filterkit::Category> want{
      {"correct_prediction", filterkit::Category::Retained},
      {"wrong_prediction", filterkit::Category::WrongPrediction},
      {"incomplete_string", filterkit::Category::ParseError},
      {"unescaped_quote", filterkit::Category::ParseError},
      {"empty_output", filterkit::Category::ParseError},
      {"extra_closing", filterkit::Category::ParseError},
  };
  std::size_t seen = 0;
  for (const auto& j : read_jsonl_strict(dir + "completions.jsonl")) {
    const auto id = j.at("id").get<std::string>();
    const auto res = teacher::parse_strict(j.at("completion").get<std::string>(), teacher::TemplateKind::Balanced);
    const auto got = filterkit::categorize(gold.at(id), res).category;
    ++seen;
    if (!want.count(id) || want.at(id) != got) o.fail(id + " -> " + std::string(filterkit::to_string(got)));
  }
  if (seen != want.size()) o.fail(fmt::format("{} fixtures, expected {}", seen, want.size()));
  const double s = seconds_since(t0);
  if (s >= 1.0) o.fail(fmt::format("took {:.3f} s", s));
  if (o.pass) o.detail = fmt::format("6/6 in {:.4f} s", s);
  return o;
}

Outcome fer_uar() {
  Outcome o;
  // 972 well-formed, 6 structural with a recoverable final label, 22 structural without one
  const std::vector<std::string> answered{
      R"({"rationale": "Smooth and generic. Therefore AI)",
      R"({"rationale": "Personal detail. HUMAN", "verdict": "HUMAN"}})",
      R"({"rationale": "He said "hi" so HUMAN", "verdict": "HUMAN"})",
      R"(verdict: AI)",
      R"({"rationale": "Uniform tone", "verdict": "AI", "confidence": 0.9})",
      R"({"rationale": "Typos everywhere." }, "verdict": "HUMAN"})",
  };
  const std::vector<std::string> answerless{
      "",
      "   ",
      R"({"rationale": "First, the text contains)",
      R"({"rationale": "The passage reads "odd" overall", "verdict": "x"})",
      R"({"rationale": "no decision reached" }})",
      "I cannot decide.",
      R"({"rationale": "cut)",
      R"(["neither"])",
      R"({"verdict": })",
      R"({"rationale": "trailing", })",
  };
  std::vector<verdictor::DetectionVerdict> vs;
  std::vector<corpus::LabeledText> golds;
  auto add = [&](const std::string& raw, Authorship gold) {
    corpus::LabeledText g;
    g.id = "c" + std::to_string(vs.size());
    g.text = "t";
    g.label = gold;
    golds.push_back(g);
    vs.push_back(verdictor::classify_completion(g.id, raw, teacher::TemplateKind::Balanced));
  };
  for (int i = 0; i < 972; ++i) {
    const bool ai = i % 2 == 0;
    add(fmt::format(R"({{"rationale": "Reason {}.", "verdict": "{}"}})", i, ai ? "AI" : "HUMAN"),
        ai ? Authorship::Ai : Authorship::Human);
  }
  for (const auto& a : answered) add(a, Authorship::Ai);
  for (int i = 0; i < 22; ++i) add(answerless[static_cast<std::size_t>(i) % answerless.size()], Authorship::Human);

  const auto s = verdictor::batch_stats(vs, golds);
  if (s.format_errors != 28) o.fail(fmt::format("{} format errors", s.format_errors));
  if (s.structural_answerless != 22) o.fail(fmt::format("{} structural answerless", s.structural_answerless));
  if (!(s.fer() == Rate{28, 1000}) || s.fer().fixed(3) != "0.028") o.fail("FER " + s.fer().fixed(4));
  if (!(s.uar() == Rate{22, 1000}) || s.uar().fixed(3) != "0.022") o.fail("UAR " + s.uar().fixed(4));
  if (o.pass) o.detail = "FER " + s.fer().fixed(3) + " UAR " + s.uar().fixed(3);
  return o;
}

Outcome metrics() {
  Outcome o;
  const eval::Confusion c{955, 50, 950, 45};
  if (!(c.fpr() == Rate{50, 1000}) || c.fpr().fixed(3) != "0.050") o.fail("FPR " + c.fpr().fixed(4));
  if (!(c.tpr() == Rate{955, 1000}) || c.tpr().fixed(3) != "0.955") o.fail("TPR " + c.tpr().fixed(4));
  if (!(c.accuracy() == Rate{9525, 10000}) || c.accuracy().fixed(3) != "0.953") o.fail("Acc " + c.accuracy().fixed(4));
  if (o.pass) o.detail = "FPR 0.050 TPR 0.955 Acc 0.9525 -> " + c.accuracy().fixed(3);
  return o;
}

std::uint64_t oracle_correct(const std::vector<eval::ScoredInstance>& xs, eval::Scope scope) {
  std::uint64_t c = 0;
  for (const auto& f : eval::oracle_threshold(xs, scope).fits) c += f.second.correct;
  return c;
}

Outcome threshold_oracle() {
  Outcome o;
  Rng rng(2024);
  const auto t0 = Clock::now();
  std::size_t points = 0;
  for (int d = 0; d < 200; ++d) {
    const auto xs = testing::random_scored(rng, 1 + rng.bounded(2000), 1);
    points += xs.size();
    const auto s = testing::scores_of(xs);
    const auto g = testing::golds_of(xs);
    const auto fit = eval::oracle_threshold(xs, eval::Scope::Global).fits.at(std::string(eval::kGlobalKey));
    const auto brute = oracle::best_correct(s, g);
    if (fit.correct != brute) o.fail(fmt::format("dataset {}: {} vs brute force {}", d, fit.correct, brute));
  }
  const double secs = seconds_since(t0);
  if (secs >= 10.0) o.fail(fmt::format("took {:.2f} s", secs));
  if (o.pass) o.detail = fmt::format("200 datasets, {} points, {:.2f} s", points, secs);
  return o;
}

Outcome dominance() {
  Outcome o;
  Rng rng(99);
  for (int d = 0; d < 100; ++d) {
    const auto xs = testing::random_scored(rng, 2 + rng.bounded(1000), 2 + rng.bounded(5));
    const auto g = oracle_correct(xs, eval::Scope::Global);
    const auto p = oracle_correct(xs, eval::Scope::PerDomain);
    if (p < g) o.fail(fmt::format("dataset {}: per-domain {} < global {}", d, p, g));
  }
  if (o.pass) o.detail = "100 datasets";
  return o;
}

Outcome monotone_invariance() {
  Outcome o;
  Rng rng(5);
  const std::vector<std::pair<std::string, std::function<double(double)>>> transforms{
      {"exp", [](double x) { return std::exp(x); }},
      {"3x+7", [](double x) { return 3 * x + 7; }},
      {"x^3", [](double x) { return x * x * x; }},
  };
  for (int d = 0; d < 100; ++d) {
    const auto xs = testing::random_scored(rng, 2 + rng.bounded(800), 3);
    for (auto scope : {eval::Scope::Global, eval::Scope::PerDomain}) {
      const auto base = oracle_correct(xs, scope);
      for (const auto& [name, f] : transforms) {
        auto ys = xs;
        for (auto& y : ys) y.score = f(y.score);
        const auto got = oracle_correct(ys, scope);
        if (got != base) o.fail(fmt::format("dataset {} {}: {} vs {}", d, name, got, base));
      }
    }
  }
  if (o.pass) o.detail = "exp, 3x+7, x^3 on 100 datasets, both scopes";
  return o;
}

Outcome trainmath_checks() {
  Outcome o;
  Rng rng(31);
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> r(rng.bounded(600)), l(1 + rng.bounded(4));
    for (auto& x : r) x = -std::pow(10.0, -8.0 + 10.0 * rng.uniform());
    for (auto& x : l) x = -std::pow(10.0, -4.0 + 4.0 * rng.uniform());
    const auto loss = trainmath::sft_loss(r, l);
    long double want = 0.0L;
    for (double x : r) want -= static_cast<long double>(x);
    for (double x : l) want -= static_cast<long double>(x);
    const double err = std::abs(loss.total - static_cast<double>(want)) / std::max(1.0L, want);
    worst = std::max(worst, err);
  }
  if (worst > 1e-12) o.fail(fmt::format("sft_loss relative error {:.3e}", worst));

  double worst_mean = 0.0;
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> rw(2 + rng.bounded(16));
    for (auto& x : rw) x = static_cast<double>(rng.bounded(3)) - 0.5 * static_cast<double>(rng.bounded(2));
    const auto a = trainmath::group_advantages(rw);
    worst_mean = std::max(worst_mean, std::abs(std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size())));
  }
  if (worst_mean > 1e-9) o.fail(fmt::format("advantage mean {:.3e}", worst_mean));

  const std::vector<double> hand{1, 0, 1, 0};
  const auto a = trainmath::group_advantages(hand);
  const std::vector<double> want{1, -1, 1, -1};
  for (std::size_t i = 0; i < 4; ++i) {
    if (std::abs(a[i] - want[i]) > 1e-12) o.fail(fmt::format("[1,0,1,0] -> a[{}] = {}", i, a[i]));
  }
  const std::vector<double> flat{0.7, 0.7, 0.7, 0.7};
  for (double x : trainmath::group_advantages(flat)) {
    if (x != 0.0) o.fail("zero-variance group gave a nonzero advantage");
  }
  if (o.pass) o.detail = fmt::format("sft worst rel err {:.1e}, worst mean {:.1e}", worst, worst_mean);
  return o;
}

Outcome scorer_oracles() {
  Outcome o;
  auto near = [&](const std::string& what, double got, double want) {
    if (!(std::abs(got - want) <= 1e-6)) o.fail(fmt::format("{}: {} vs {}", what, got, want));
  };
  std::vector<std::vector<double>> ten(2, std::vector<double>(10, 0.05));
  const auto lr = oracle::synthetic(ten, {0, 9});
  near("logrank", scorers::logrank(lr), oracle::logrank(lr));
  near("logrank hand", scorers::logrank(lr), 1.1512925465);

  const std::vector<lm::ScoredText> vs{oracle::flat({-2.0}), oracle::flat({-4.0})};
  const std::vector<double> vlls{-2.0, -4.0};
  near("detectgpt", scorers::detectgpt(oracle::flat({-1.0}), vs), oracle::detectgpt(-1.0, vlls));
  near("detectgpt hand", scorers::detectgpt(oracle::flat({-1.0}), vs), 2.0);

  const auto fd = oracle::synthetic({{0.75, 0.25}}, {0});
  near("fast-detectgpt", scorers::fast_detectgpt(fd), oracle::fast_detectgpt(fd));
  if (std::abs(scorers::fast_detectgpt(fd) - 0.577) > 5e-4) o.fail("fast-detectgpt not ~0.577");

  const std::vector<std::string> truth{"a", "b", "c", "d", "e"}, regen{"a", "b", "c", "x", "y"};
  near("jaccard", scorers::kgram_jaccard(truth, regen, 2), oracle::multiset_jaccard(truth, regen, 2));
  near("jaccard hand", scorers::kgram_jaccard(truth, regen, 2), 1.0 / 3.0);

  const auto en = oracle::synthetic({{0.5, 0.25, 0.25}}, {0});
  near("entropy", scorers::entropy(en), oracle::entropy(en));
  if (std::abs(scorers::entropy(en) - 1.0397) > 5e-5) o.fail("entropy not ~1.0397");
  if (o.pass) {
    o.detail = fmt::format("logrank {:.4f} detectgpt {:.4f} fast {:.4f} jaccard {:.4f} entropy {:.4f}",
                           scorers::logrank(lr), scorers::detectgpt(oracle::flat({-1.0}), vs),
                           scorers::fast_detectgpt(fd), scorers::kgram_jaccard(truth, regen, 2), scorers::entropy(en));
  }
  return o;
}

Outcome diagnostics_checks() {
  Outcome o;
  Rng rng(8);
  for (int t = 0; t < 400; ++t) {
    const auto n = 2 + rng.bounded(499);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = t % 3 == 0 ? static_cast<double>(rng.bounded(5)) : rng.uniform();
      y[i] = static_cast<int>(rng.bounded(2));
    }
    y[0] = 0;
    y[n - 1] = 1;
    const double got = diagnostics::auroc(s, y), want = oracle::pairwise_auroc(s, y).value();
    if (got != want) o.fail(fmt::format("auroc trial {}: {} vs {}", t, got, want));
  }

  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 10 + rng.bounded(40), d = 1 + rng.bounded(8);
    diagnostics::Matrix x(n, std::vector<double>(d));
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& v : x[i]) v = rng.uniform() * 4 - 2;
      y[i] = static_cast<int>(rng.bounded(2));
    }
    std::vector<double> w(d);
    for (auto& v : w) v = rng.uniform() * 2 - 1;
    const double b = rng.uniform() - 0.5, l2 = 0.05;
    const auto g = diagnostics::logreg_gradient(w, b, x, y, l2);
    for (std::size_t k = 0; k <= d; ++k) {
      const double h = 1e-5;
      auto wp = w, wm = w;
      double bp = b, bm = b;
      if (k < d) {
        wp[k] += h;
        wm[k] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fdiff =
          (diagnostics::logreg_objective(wp, bp, x, y, l2) - diagnostics::logreg_objective(wm, bm, x, y, l2)) / (2 * h);
      worst = std::max(worst, std::abs(fdiff - g[k]) / std::max(1.0, std::abs(g[k])));
    }
  }
  if (worst > 1e-6) o.fail(fmt::format("gradient relative error {:.3e}", worst));

  diagnostics::Matrix x;
  std::vector<int> y;
  for (int i = 0; i < 60; ++i) {
    const int label = i % 2;
    x.push_back({(label ? 1.0 : -1.0) + 0.5 * (rng.uniform() - 0.5), rng.uniform() - 0.5, rng.uniform()});
    y.push_back(label);
  }
  const auto m = diagnostics::train_logreg(x, y);
  std::vector<double> s;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s.push_back(m.decision(x[i]));
    correct += (s.back() >= 0.0) == (y[i] == 1);
  }
  if (correct != x.size()) o.fail(fmt::format("separable accuracy {}/{}", correct, x.size()));
  if (diagnostics::auroc(s, y) != 1.0) o.fail("separable AUROC below 1");
  if (o.pass) o.detail = fmt::format("400 auroc sets exact, gradient worst {:.1e}, separable 1.0/1.0", worst);
  return o;
}

Outcome funnels() {
  Outcome o;
  Rng rng(10000);
  const teacher::ParseResult fail = teacher::ParseFailure{teacher::FailureKind::Incomplete, "", ""};
  for (int f = 0; f < 10000; ++f) {
    std::vector<filterkit::FilterOutcome> outs;
    std::vector<corpus::LabeledText> pool;
    const auto n = rng.bounded(40), p = rng.bounded(40);
    std::set<std::string> ids;
    for (std::uint64_t i = 0; i < n + p; ++i) {
      corpus::LabeledText t;
      t.id = fmt::format("f{}-{}", f, rng.next() % 1000000007);
      if (!ids.insert(t.id).second) continue;
      t.text = "x";
      t.label = rng.bounded(2) ? Authorship::Ai : Authorship::Human;
      if (i >= n) {
        pool.push_back(t);
        continue;
      }
      const auto pick = rng.bounded(3);
      const auto said = pick == 0 ? t.label : (t.label == Authorship::Ai ? Authorship::Human : Authorship::Ai);
      const teacher::ParseResult res =
          pick == 2 ? fail : teacher::ParseResult{teacher::ParsedRationale{"r", said, "", false}};
      outs.push_back(filterkit::categorize(t, res));
    }
    const auto d = filterkit::build_datasets(outs, pool);
    std::multiset<std::string> got;
    for (const auto& s : d.sft) got.insert(s.source.id);
    for (const auto& g : d.grpo) got.insert(g.source.id);
    if (got.size() != ids.size() || std::set<std::string>(got.begin(), got.end()) != ids) {
      o.fail(fmt::format("funnel {}: {} ids in, {} out", f, ids.size(), got.size()));
      break;
    }
    if (d.report.sft_size + d.report.grpo_size != ids.size()) o.fail(fmt::format("funnel {}: report sizes", f));
  }
  if (o.pass) o.detail = "10000 funnels";
  return o;
}

Outcome determinism() {
  Outcome o;
  testing::TempDir tmp;
  toy::StubServer server;
  const auto steps = testing::run_pipeline(tmp.path(), server.url());
  std::map<std::string, std::map<std::string, std::string>> first;
  for (const auto& s : steps) {
    if (s.result.code != 0) o.fail(s.name + " exited " + std::to_string(s.result.code) + ": " + s.result.err);
    first[s.name] = testing::snapshot(s.result.run_dir());
  }
  const auto calls = server.requests();
  server.stop();
  std::size_t files = 0;
  for (const auto& s : steps) {
    const auto again = testing::run_cli(s.args);
    if (again.code != 0) o.fail(s.name + " re-run exited " + std::to_string(again.code));
    if (again.run_dir() != s.result.run_dir()) o.fail(s.name + " re-run named a different directory");
    const auto snap = testing::snapshot(again.run_dir());
    if (snap != first[s.name]) o.fail(s.name + " re-run differs");
    files += snap.size();
  }
  if (server.requests() != calls) o.fail("re-runs reached the endpoint");
  if (o.pass) o.detail = fmt::format("{} subcommand runs, {} files byte-identical from cache", steps.size(), files);
  return o;
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"parser-fixtures", parser_fixtures},
      {"fer-uar", fer_uar},
      {"metric-reproduction", metrics},
      {"oracle-threshold-vs-brute-force", threshold_oracle},
      {"per-domain-dominance", dominance},
      {"monotone-transform-invariance", monotone_invariance},
      {"trainmath", trainmath_checks},
      {"scorer-oracles", scorer_oracles},
      {"diagnostics", diagnostics_checks},
      {"dataset-conservation", funnels},
      {"determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome r;
    try {
      r = fn();
    } catch (const std::exception& e) {
      r.fail(std::string("threw: ") + e.what());
    }
    std::printf("%s %s: %s\n", r.pass ? "PASS" : "FAIL", name.c_str(), r.detail.c_str());
    failed += r.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
