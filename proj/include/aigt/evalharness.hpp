#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aigt/common.hpp"
#include "aigt/corpus.hpp"
#include "aigt/json_io.hpp"

namespace aigt::eval {

/// GE predicts AI when score >= tau; LT predicts AI when score < tau.
enum class Direction { Ge, Lt };
enum class Scope { Global, PerDomain };

std::string_view to_string(Direction d);
std::string_view to_string(Scope s);
std::optional<Scope> parse_scope(std::string_view s);

inline constexpr std::string_view kGlobalKey = "*";

struct Rule {
  double tau = 0.0;
  Direction direction = Direction::Ge;

  bool predicts_ai(double score) const { return direction == Direction::Ge ? score >= tau : score < tau; }
};

struct ScoredInstance {
  std::string id;
  std::string domain;
  Authorship gold = Authorship::Human;
  double score = 0.0;
  std::size_t tokens = 0;
};

struct ThresholdFit {
  Rule rule;
  std::uint64_t correct = 0;
  std::uint64_t total = 0;

  Rate accuracy() const { return {correct, total}; }
};

/// Accuracy-maximizing rule over the candidate thresholds -inf, the midpoints
/// of consecutive distinct scores, and +inf, in both directions (or only the
/// pinned one). Ties go to the smallest tau, then to GE. O(n log n).
ThresholdFit fit_threshold(std::span<const double> scores, std::span<const Authorship> golds,
                           std::optional<Direction> pin = std::nullopt);

/// Candidate thresholds in ascending order. Each midpoint m between distinct
/// neighbours a < b satisfies a < m <= b.
std::vector<double> candidate_thresholds(std::span<const double> scores);

struct ThresholdConfig {
  Scope scope = Scope::Global;
  std::map<std::string, Rule> thresholds;  // "*" for GLOBAL, else one per domain
  std::map<std::string, ThresholdFit> fits;

  /// Throws ConfigError when a PER_DOMAIN config lacks the domain.
  const Rule& rule_for(const std::string& domain) const;
};

json to_json(const ThresholdConfig& c);
ThresholdConfig threshold_config_from_json(const json& j);

/// Tunes one rule for the whole set (GLOBAL) or one per domain. With
/// `pin_direction`, per-domain searches reuse the direction of the global fit.
ThresholdConfig oracle_threshold(std::span<const ScoredInstance> instances, Scope scope, bool pin_direction = false);

/// Tunes every scorer's matrix; independent searches run in parallel.
std::map<std::string, ThresholdConfig> tune_all(const std::map<std::string, std::vector<ScoredInstance>>& matrix,
                                                Scope scope, bool pin_direction, Exec exec = Exec::Parallel);

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  void add(bool predicted_ai, Authorship gold);
  std::uint64_t total() const { return tp + fp + tn + fn; }
  Rate accuracy() const { return {tp + tn, total()}; }
  Rate fpr() const { return {fp, fp + tn}; }
  Rate tpr() const { return {tp, tp + fn}; }

  friend bool operator==(const Confusion&, const Confusion&) = default;
};

json to_json(const Confusion& c);
Confusion confusion_from_json(const json& j);

struct BucketResult {
  std::string label;
  Confusion confusion;
};

struct EvalReport {
  Confusion overall;
  std::map<std::string, Confusion> per_domain;
  std::vector<BucketResult> per_bucket;
  json provenance = json::object();
};

json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const json& j);

EvalReport evaluate(std::span<const ScoredInstance> instances, const ThresholdConfig& config,
                    std::span<const std::size_t> length_edges = corpus::kDefaultLengthEdges);

enum class Mark { None, Best, Second };

/// Rows are named reports; columns are per-domain accuracy, overall accuracy,
/// FPR (lower is better) and TPR. All rows tied at the top are marked best;
/// the next distinct value is marked second when at least three rows compete.
struct ComparisonTable {
  std::vector<std::string> rows;
  std::vector<std::string> columns;
  std::vector<std::vector<Rate>> cells;
  std::vector<std::vector<Mark>> marks;

  std::string markdown() const;
  std::string csv() const;
};

ComparisonTable compare_reports(std::span<const std::pair<std::string, EvalReport>> reports);

}  // namespace aigt::eval
