// Serial reference vs OpenMP path for the two batch kernels: single-pass
// scoring and threshold tuning. Also checks the two paths agree.

#include <CLI11.hpp>
#include <spdlog/fmt/fmt.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "aigt/evalharness.hpp"
#include "aigt/rng.hpp"
#include "aigt/scorers.hpp"

using namespace aigt;

namespace {

lm::ScoredText synthetic_text(Rng& rng, std::size_t tokens, std::size_t k) {
  lm::ScoredText s;
  s.tokens.reserve(tokens);
  for (std::size_t i = 0; i < tokens; ++i) {
    lm::TokenScore t;
    t.position = i;
    double left = 0.9;
    for (std::size_t j = 0; j < k; ++j) {
      const double p = left * (0.3 + 0.4 * rng.uniform());
      left -= p;
      t.alternatives.push_back({"t" + std::to_string(j), std::log(p)});
    }
    std::sort(t.alternatives.begin(), t.alternatives.end(),
              [](const auto& a, const auto& b) { return a.logprob > b.logprob; });
    const auto pick = rng.bounded(k + 1);
    if (pick < k) {
      t.token_text = t.alternatives[pick].token_text;
      t.logprob = t.alternatives[pick].logprob;
    } else {
      t.token_text = "rare";
      t.logprob = std::log(1e-4);
    }
    s.tokens.push_back(std::move(t));
  }
  return s;
}

template <class F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const std::string& name, double serial, double parallel, bool same) {
  std::printf("%-28s %10.4f %10.4f %8.2fx  %s\n", name.c_str(), serial, parallel, serial / parallel,
              same ? "match" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial vs parallel timings for the batch kernels", "aigt_bench"};
  std::size_t texts = 2000, tokens = 300, scorers_n = 8, instances = 20000;
  int reps = 3;
  std::uint64_t seed = 1;
  app.add_option("--texts", texts, "scored texts per batch")->capture_default_str();
  app.add_option("--tokens", tokens, "tokens per text")->capture_default_str();
  app.add_option("--scorers", scorers_n, "score matrices to tune")->capture_default_str();
  app.add_option("--instances", instances, "instances per score matrix")->capture_default_str();
  app.add_option("--reps", reps, "repetitions; the best time is reported")->capture_default_str();
  app.add_option("--seed", seed)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  Rng rng(seed);
  std::vector<lm::ScoredText> batch;
  batch.reserve(texts);
  for (std::size_t i = 0; i < texts; ++i) batch.push_back(synthetic_text(rng, tokens, 20));

  std::printf("%-28s %10s %10s %9s\n", "kernel", "serial s", "parallel s", "speedup");
  bool all_same = true;
  for (auto k : {scorers::ScorerKind::Likelihood, scorers::ScorerKind::Entropy, scorers::ScorerKind::LogRank,
                 scorers::ScorerKind::Lrr, scorers::ScorerKind::FastDetectGpt}) {
    std::vector<double> a, b;
    const double ts = best_of(reps, [&] { a = scorers::score_batch(k, batch, Exec::Serial); });
    const double tp = best_of(reps, [&] { b = scorers::score_batch(k, batch, Exec::Parallel); });
    row(fmt::format("score_batch {}", scorers::to_string(k)), ts, tp, a == b);
    all_same &= a == b;
  }

  std::map<std::string, std::vector<eval::ScoredInstance>> matrix;
  for (std::size_t s = 0; s < scorers_n; ++s) {
    auto& v = matrix["scorer" + std::to_string(s)];
    v.resize(instances);
    for (std::size_t i = 0; i < instances; ++i) {
      v[i].id = std::to_string(i);
      v[i].domain = "d" + std::to_string(rng.bounded(5));
      v[i].gold = rng.bounded(2) ? Authorship::Ai : Authorship::Human;
      v[i].score = rng.uniform() + (v[i].gold == Authorship::Ai ? 0.3 : 0.0);
    }
  }
  for (auto scope : {eval::Scope::Global, eval::Scope::PerDomain}) {
    std::map<std::string, eval::ThresholdConfig> a, b;
    const double ts = best_of(reps, [&] { a = eval::tune_all(matrix, scope, false, Exec::Serial); });
    const double tp = best_of(reps, [&] { b = eval::tune_all(matrix, scope, false, Exec::Parallel); });
    bool same = a.size() == b.size();
    for (const auto& [name, cfg] : a) same &= eval::to_json(cfg) == eval::to_json(b.at(name));
    row(fmt::format("tune_all {}", eval::to_string(scope)), ts, tp, same);
    all_same &= same;
  }
  return all_same ? 0 : 1;
}
