#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aigt/common.hpp"
#include "aigt/lmclient.hpp"

namespace aigt::scorers {

enum class ScorerKind { Likelihood, Entropy, LogRank, Lrr, Npr, DetectGpt, FastDetectGpt, Binoculars, DnaGpt };

inline constexpr ScorerKind kAllScorers[] = {
    ScorerKind::Likelihood, ScorerKind::Entropy,       ScorerKind::LogRank,
    ScorerKind::Lrr,        ScorerKind::Npr,           ScorerKind::DetectGpt,
    ScorerKind::FastDetectGpt, ScorerKind::Binoculars, ScorerKind::DnaGpt,
};

std::string_view to_string(ScorerKind k);
/// likelihood | entropy | logrank | lrr | npr | detectgpt | fast-detectgpt | binoculars | dnagpt
std::optional<ScorerKind> parse_scorer_kind(std::string_view s);

/// Sign applied to the raw statistic so that larger always means more AI-like.
int orientation_sign(ScorerKind k);

/// True for scorers computed from a single ScoredText.
bool is_single_pass(ScorerKind k);

struct DetectorScore {
  ScorerKind scorer = ScorerKind::Likelihood;
  std::string id;
  double raw = 0.0;
  double value = 0.0;  // raw * orientation_sign(scorer)
};

DetectorScore oriented(ScorerKind k, std::string id, double raw);

// ---------------------------------------------------------------------------
// Raw statistics. Each throws PreconditionError on an empty token list or a
// non-finite logprob.

/// Mean token logprob.
double likelihood(const lm::ScoredText& s);
/// Mean per-position entropy over the top-K alternatives plus one tail outcome.
double entropy(const lm::ScoredText& s);
/// Mean ln(rank); a token missing from the alternatives gets rank K+1.
double logrank(const lm::ScoredText& s);
/// |mean logprob| / max(mean log-rank, eps).
double lrr(const lm::ScoredText& s);
/// (ll - sum E[logprob]) / max(sqrt(sum Var[logprob]), eps) under the
/// truncated per-position distributions.
double fast_detectgpt(const lm::ScoredText& s);
/// (ll(x) - mean ll(v)) / max(std ll(v), eps) with the population std.
double detectgpt(const lm::ScoredText& original, std::span<const lm::ScoredText> variants);
/// mean log-rank(variants) / max(log-rank(original), eps).
double npr(const lm::ScoredText& original, std::span<const lm::ScoredText> variants);
/// Observer mean NLL / max(cross mean NLL, eps). `cross` carries one
/// per-position cross entropy as the negated logprob of each token.
double binoculars(const lm::ScoredText& observer, const lm::ScoredText& cross);

/// Per-position cross entropy of the performer's next-token distribution
/// against the observer's, as a ScoredText usable by binoculars(). Both
/// inputs must cover the same tokens.
lm::ScoredText cross_perplexity_text(const lm::ScoredText& observer, const lm::ScoredText& performer);

/// Whitespace tokens of `text` split at round(prefix_fraction * n).
struct DnaSplit {
  std::string prefix;
  std::vector<std::string> continuation;
};
DnaSplit dna_split(std::string_view text, double prefix_fraction);

/// Multiset Jaccard (sum of min counts / sum of max counts) over k-grams.
/// Sequences shorter than k contribute one gram holding the whole sequence.
double kgram_jaccard(std::span<const std::string> a, std::span<const std::string> b, std::size_t k);

/// Mean k-gram Jaccard between the true continuation and each regeneration.
double dnagpt(std::string_view text, double prefix_fraction, std::size_t k, std::span<const std::string> regenerations);

// ---------------------------------------------------------------------------

using VariantRewriter = std::function<std::string(std::string_view text, std::uint64_t seed)>;

struct PerturbationSet {
  std::string original;
  std::vector<std::string> variants;
  std::string generator;
};

/// n variants, variant i drawn with seed mix_seed(seed, i). A variant equal to
/// the original is rejected with PreconditionError.
PerturbationSet perturb(std::string_view text, std::size_t n, const VariantRewriter& rewriter, std::uint64_t seed,
                        std::string generator = "callback");

/// Masks a seeded selection of word spans and asks a chat endpoint to fill
/// them back in.
VariantRewriter make_span_rewriter(lm::Client& client, lm::EndpointConfig chat, double mask_fraction = 0.15,
                                   std::size_t span_words = 2);

/// Replaces seeded word spans with numbered blanks. Returns the masked text
/// and the number of blanks.
std::pair<std::string, std::size_t> mask_spans(std::string_view text, std::uint64_t seed, double mask_fraction,
                                               std::size_t span_words);

/// `count` continuations of `prefix` from a chat endpoint at temperature 1,
/// regeneration i seeded with mix_seed(seed, i).
std::vector<std::string> regenerate_continuations(lm::Client& client, const lm::EndpointConfig& chat,
                                                  std::string_view prefix, std::size_t target_words,
                                                  std::size_t count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Batch kernel over single-pass scorers. Serial is the reference path; the
// parallel path must agree with it bit for bit.

std::vector<double> score_batch(ScorerKind k, std::span<const lm::ScoredText> texts, Exec exec = Exec::Parallel);

}  // namespace aigt::scorers
