#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aigt/common.hpp"
#include "aigt/json_io.hpp"

namespace aigt::diagnostics {

/// Label-assertion phrases and mask vocabulary, loaded from the versioned
/// lexicon format in data/label_lexicon_v1.txt.
struct LabelLexicon {
  struct Assertion {
    std::string phrase;
    Authorship label = Authorship::Human;
    bool case_sensitive = false;
  };
  std::vector<Assertion> assertions;
  std::vector<std::string> mask_words;

  static LabelLexicon parse(std::string_view text);
  static LabelLexicon load(const std::filesystem::path& path);
  static const LabelLexicon& builtin();
};

inline constexpr std::string_view kMaskToken = "[MASK]";

/// Label of the last assertion phrase found in the rationale (whole-word
/// matches; an overlap is won by the later start, then by the longer phrase).
std::optional<Authorship> extract_rationale_label(std::string_view rationale,
                                                  const LabelLexicon& lexicon = LabelLexicon::builtin());

struct ConsistencyRecord {
  std::string id;
  std::optional<Authorship> rationale_label;
  Authorship verdict = Authorship::Human;

  std::optional<bool> match() const {
    if (!rationale_label) return std::nullopt;
    return *rationale_label == verdict;
  }
};

struct ConsistencySummary {
  Rate match_rate;  // matches / records with a label
  std::size_t absent = 0;
  std::size_t total = 0;
};

ConsistencySummary consistency_rate(std::span<const ConsistencyRecord> records);

struct MaskedSpan {
  std::size_t start = 0;  // byte offsets into the original text
  std::size_t end = 0;
  std::string original;
};

struct MaskedRationale {
  std::string text;
  std::vector<MaskedSpan> spans;  // ascending, non-overlapping
};

/// Case-insensitive whole-word masking. At each position the longest
/// vocabulary entry wins, so a listed compound such as "ai-generated" is
/// masked whole; otherwise a hyphen is a word boundary ("AI-like" becomes
/// "[MASK]-like").
MaskedRationale mask_labels(std::string_view rationale, std::span<const std::string> vocabulary);
MaskedRationale mask_labels(std::string_view rationale);

/// Inverse of mask_labels, byte-exact.
std::string reconstruct(const MaskedRationale& m);

// ---------------------------------------------------------------------------
// Logistic regression probe

struct LogRegOptions {
  double l2 = 1e-2;
  int max_iters = 2000;
  double tol = 1e-6;
};

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::size_t feature_dim = 0;
  std::vector<double> loss_history;  // one entry per accepted step, plus the start
  int iterations = 0;
  bool converged = false;

  double decision(std::span<const double> x) const;
  double probability(std::span<const double> x) const;
};

using Matrix = std::vector<std::vector<double>>;

/// Mean logistic loss plus (l2 / 2) * ||w||^2; the bias is not penalized.
double logreg_objective(std::span<const double> weights, double bias, const Matrix& x, std::span<const int> y,
                        double l2);
/// Gradient of logreg_objective: weights first, bias last.
std::vector<double> logreg_gradient(std::span<const double> weights, double bias, const Matrix& x,
                                    std::span<const int> y, double l2);

/// Gradient descent with Armijo backtracking from the zero vector. Labels are
/// 0/1 and both classes must be present.
LogRegModel train_logreg(const Matrix& x, std::span<const int> y, const LogRegOptions& opts = {});

/// "dim <d>" header, then the bias, then one weight per line.
std::string serialize_weights(const LogRegModel& m);
LogRegModel parse_weights(std::string_view text);

/// Rank-based AUROC with ties counted one half. Computed in integer
/// arithmetic so it equals pairwise counting exactly. Labels are 0/1; both
/// classes must be present.
double auroc(std::span<const double> scores, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Probe slices: original/masked rationale embeddings x all/correct/wrong.

struct ProbeRecord {
  std::string id;
  Authorship verdict = Authorship::Human;
  Authorship gold = Authorship::Human;
  std::vector<double> original_embedding;
  std::vector<double> masked_embedding;
};

struct ProbeOptions {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  LogRegOptions logreg;
};

struct SliceResult {
  std::string representation;  // original | masked
  std::string subset;          // all | correct | wrong
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::optional<double> auroc;  // absent when the test split lacks a class
  Rate accuracy;
  std::string note;
  std::optional<LogRegModel> model;
};

/// Predicts the verdict from the rationale embedding on a seeded,
/// verdict-stratified split per slice.
std::vector<SliceResult> probe_slices(std::span<const ProbeRecord> records, const ProbeOptions& opts);

std::string consistency_csv(const ConsistencySummary& s);
std::string probe_csv(std::span<const SliceResult> slices);

}  // namespace aigt::diagnostics
