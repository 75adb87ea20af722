#include "aigt/trainmath.hpp"

#include <algorithm>
#include <cmath>

namespace aigt::trainmath {

namespace {

// Neumaier summation
double negated_sum(std::span<const double> xs, const char* what) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : xs) {
    if (!std::isfinite(x)) throw PreconditionError(std::string(what) + " logprob is not finite");
    if (x > 0.0) throw PreconditionError(std::string(what) + " logprob is positive: " + std::to_string(x));
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) comp += (sum - t) + x;
    else comp += (x - t) + sum;
    sum = t;
  }
  return -(sum + comp);
}

}  // namespace

SftLossBreakdown sft_loss(std::span<const double> rationale_logprobs, std::span<const double> label_logprobs) {
  if (label_logprobs.empty()) throw PreconditionError("label token list is empty");
  SftLossBreakdown out;
  out.rationale_nll = negated_sum(rationale_logprobs, "rationale");
  out.label_nll = negated_sum(label_logprobs, "label");
  out.total = out.rationale_nll + out.label_nll;
  return out;
}

void RewardSpec::validate() const {
  if (!std::isfinite(correct) || !std::isfinite(incorrect) || !std::isfinite(unparseable)) {
    throw ConfigError("reward values must be finite");
  }
  if (!(correct > incorrect && incorrect >= unparseable)) {
    throw ConfigError("reward spec must satisfy correct > incorrect >= unparseable");
  }
}

json RewardSpec::to_json() const {
  return json{{"correct", correct}, {"incorrect", incorrect}, {"unparseable", unparseable}};
}

double reward(const teacher::ParseResult& outcome, Authorship gold, const RewardSpec& spec) {
  if (const auto* p = std::get_if<teacher::ParsedRationale>(&outcome)) {
    return p->verdict == gold ? spec.correct : spec.incorrect;
  }
  return spec.unparseable;
}

std::vector<double> group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) throw PreconditionError("a rollout group needs at least two rewards");
  for (double r : rewards) {
    if (!std::isfinite(r)) throw PreconditionError("reward is not finite");
  }
  std::vector<double> out(rewards.size(), 0.0);
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == *hi) return out;
  const double n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= n;
  double ss = 0.0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double sd = std::sqrt(ss / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
  return out;
}

RolloutGroup make_group(std::string prompt_id, Authorship gold, std::span<const std::string> completions,
                        teacher::TemplateKind kind, const RewardSpec& spec) {
  spec.validate();
  RolloutGroup g;
  g.prompt_id = std::move(prompt_id);
  g.gold = gold;
  for (const auto& c : completions) {
    g.completions.push_back(teacher::parse_strict(c, kind));
    g.rewards.push_back(reward(g.completions.back(), gold, spec));
  }
  return g;
}

json to_json(const AdvantageRecord& r) {
  return json{{"prompt_id", r.prompt_id},
              {"completion_index", r.completion_index},
              {"reward", r.reward},
              {"advantage", r.advantage}};
}

std::vector<AdvantageRecord> export_advantages(std::span<const RolloutGroup> groups) {
  std::vector<AdvantageRecord> out;
  for (const auto& g : groups) {
    if (g.rewards.size() != g.completions.size()) {
      throw PreconditionError("group '" + g.prompt_id + "' has misaligned rewards");
    }
    const auto adv = group_advantages(g.rewards);
    for (std::size_t i = 0; i < adv.size(); ++i) out.push_back({g.prompt_id, i, g.rewards[i], adv[i]});
  }
  return out;
}

}  // namespace aigt::trainmath
