#pragma once

#include <span>
#include <string>
#include <vector>

#include "aigt/common.hpp"
#include "aigt/json_io.hpp"
#include "aigt/teacher.hpp"

namespace aigt::trainmath {

struct SftLossBreakdown {
  double rationale_nll = 0.0;
  double label_nll = 0.0;
  double total = 0.0;
};

/// Negative log-likelihood of the rationale tokens and of the label tokens
/// given the rationale. Logprobs must be <= 0; the label list must be
/// non-empty. Sums are compensated so long sequences stay accurate.
SftLossBreakdown sft_loss(std::span<const double> rationale_logprobs, std::span<const double> label_logprobs);

struct RewardSpec {
  double correct = 1.0;
  double incorrect = 0.0;
  double unparseable = -0.5;

  /// correct > incorrect >= unparseable, all finite.
  void validate() const;
  json to_json() const;
};

double reward(const teacher::ParseResult& outcome, Authorship gold, const RewardSpec& spec);

/// (r - mean) / std with the population std. Groups whose rewards are all
/// equal map to zeros. Fewer than two rewards is a PreconditionError.
std::vector<double> group_advantages(std::span<const double> rewards);

struct RolloutGroup {
  std::string prompt_id;
  Authorship gold = Authorship::Human;
  std::vector<teacher::ParseResult> completions;
  std::vector<double> rewards;
};

RolloutGroup make_group(std::string prompt_id, Authorship gold, std::span<const std::string> completions,
                        teacher::TemplateKind kind, const RewardSpec& spec);

struct AdvantageRecord {
  std::string prompt_id;
  std::size_t completion_index = 0;
  double reward = 0.0;
  double advantage = 0.0;
};

json to_json(const AdvantageRecord& r);

std::vector<AdvantageRecord> export_advantages(std::span<const RolloutGroup> groups);

}  // namespace aigt::trainmath
