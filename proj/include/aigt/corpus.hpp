#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aigt/common.hpp"
#include "aigt/json_io.hpp"

namespace aigt::corpus {

enum class Split { Train, Test, Unassigned };

std::string_view to_string(Split s);

/// One corpus instance. `generator` is present iff the label is AI.
/// `rationale` is only set on SFT records; `attack` records transform provenance.
struct LabeledText {
  std::string id;
  std::string text;
  Authorship label = Authorship::Human;
  std::string domain;
  std::optional<std::string> generator;
  Split split = Split::Unassigned;
  std::optional<std::string> rationale;
  std::optional<std::string> attack;

  friend bool operator==(const LabeledText&, const LabeledText&) = default;
};

json to_json(const LabeledText& t);

struct CorpusStats {
  std::map<std::string, std::size_t> per_domain;
  std::map<std::string, std::size_t> per_generator;
  std::size_t human_count = 0;
  std::size_t ai_count = 0;

  std::size_t total() const { return human_count + ai_count; }
};

CorpusStats compute_stats(std::span<const LabeledText> records);
json to_json(const CorpusStats& s);

struct RecordRejection {
  std::size_t line;
  std::string reason;
};

struct LoadedCorpus {
  std::vector<LabeledText> records;
  CorpusStats stats;
  std::vector<RecordRejection> rejections;
  std::vector<std::string> warnings;
};

/// Reads line-delimited JSON records (fields id,text,label,domain,generator,split).
/// Invalid records are rejected individually with their line number; the
/// rest keep input order. Throws Error if the path cannot be opened.
LoadedCorpus load_corpus(const std::filesystem::path& path);
LoadedCorpus parse_corpus(std::istream& in);

void write_corpus(const std::filesystem::path& path, std::span<const LabeledText> records);

struct SplitResult {
  std::vector<LabeledText> train;
  std::vector<LabeledText> test;
  std::vector<std::string> warnings;
};

/// Stratified, seeded train/test split. `stratify_by` is a comma-separated
/// list drawn from {label, domain, generator}. Within each stratum the test
/// share is round(test_fraction * size), capped at size - 1 so that every
/// stratum keeps a training instance; a stratum left with no test instance is
/// reported in `warnings`. Both outputs preserve input order.
SplitResult split_train_test(std::span<const LabeledText> records, double test_fraction, std::uint64_t seed,
                             std::string_view stratify_by);

using TokenCounter = std::function<std::size_t(std::string_view)>;

std::size_t whitespace_token_count(std::string_view text);

inline constexpr std::array<std::size_t, 4> kDefaultLengthEdges{150, 300, 450, 600};

struct LengthBucket {
  std::string label;
  std::size_t lo = 0;
  std::optional<std::size_t> hi;  // exclusive; absent for the open last bucket
  std::vector<std::size_t> members;  // indices into the input span
};

/// Half-open buckets [0,e0), [e0,e1), ..., [e_last, inf). Edges must be
/// strictly ascending.
std::vector<LengthBucket> bucket_by_length(std::span<const LabeledText> records, const TokenCounter& counter,
                                           std::span<const std::size_t> edges);
std::vector<LengthBucket> make_length_buckets(std::span<const std::size_t> edges);
std::size_t bucket_index(std::size_t tokens, std::span<const std::size_t> edges);

// ---------------------------------------------------------------------------
// Adversarial transforms

enum class AttackKind { Mixed, Paraphrase, Homoglyph };

std::string_view to_string(AttackKind k);
std::optional<AttackKind> parse_attack_kind(std::string_view s);

struct AttackSpec {
  AttackKind kind = AttackKind::Homoglyph;
  double mix_ratio = 0.0;          // MIXED only: share of human sentences in the output
  double substitution_rate = 0.0;  // HOMOGLYPH only
  std::uint64_t seed = 0;
};

/// Source code point -> visually confusable replacement.
class ConfusableMap {
 public:
  ConfusableMap() = default;
  /// Parses the tab-separated format of data/confusables_v1.tsv.
  static ConfusableMap parse(std::string_view tsv);
  static ConfusableMap load(const std::filesystem::path& path);
  static const ConfusableMap& builtin();

  void add(char32_t from, char32_t to) { map_[from] = to; }
  const char32_t* find(char32_t cp) const;
  std::size_t size() const { return map_.size(); }

 private:
  std::map<char32_t, char32_t> map_;
};

using Rewriter = std::function<std::string(std::string_view)>;

struct AttackContext {
  const ConfusableMap* confusables = nullptr;  // defaults to builtin()
  std::span<const std::string> human_pool;     // MIXED companion texts
  Rewriter rewriter;                            // PARAPHRASE round trip
};

/// Returns a transformed copy with label and id preserved and `attack` set.
LabeledText apply_attack(const LabeledText& instance, const AttackSpec& spec, const AttackContext& ctx);

/// Splits on runs of . ! ? followed by whitespace; punctuation stays attached.
std::vector<std::string> split_sentences(std::string_view text);

}  // namespace aigt::corpus
