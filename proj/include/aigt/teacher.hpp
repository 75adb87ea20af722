#pragma once

#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aigt/common.hpp"
#include "aigt/corpus.hpp"
#include "aigt/lmclient.hpp"

namespace aigt::teacher {

enum class TemplateKind { Balanced, Concise, Rubric, OneShot, NonCot };

std::string_view to_string(TemplateKind k);
/// balanced | concise | rubric | oneshot | noncot
std::optional<TemplateKind> parse_template_kind(std::string_view s);
bool demands_rationale(TemplateKind k);

inline constexpr std::string_view kTextSlot = "{{TEXT}}";

struct PromptTemplate {
  TemplateKind kind = TemplateKind::Balanced;
  std::string body;  // contains kTextSlot exactly once

  /// The shipped instruction block followed by the passage slot.
  static PromptTemplate builtin(TemplateKind kind);
  /// Throws ConfigError unless `body` holds exactly one slot.
  static PromptTemplate custom(TemplateKind kind, std::string body);
};

std::string render_prompt(const PromptTemplate& tmpl, std::string_view text);

struct ParsedRationale {
  std::string rationale;  // empty for NON_COT
  Authorship verdict = Authorship::Human;
  std::string raw;
  bool normalized = false;  // verdict needed trimming or case folding
};

enum class FailureKind {
  Empty,
  Incomplete,
  UnescapedQuote,
  ExtraClosing,
  Malformed,
  MissingField,
  UnexpectedField,
  BadVerdict,
};

std::string_view to_string(FailureKind k);
std::optional<FailureKind> parse_failure_kind(std::string_view s);

struct ParseFailure {
  FailureKind kind = FailureKind::Malformed;
  std::string detail;
  std::string field;  // set for MissingField / UnexpectedField / BadVerdict
};

/// True for failures of the demanded structure itself; false when the
/// structure holds but the verdict field is missing or unusable.
bool is_structural(const ParseFailure& f);

using ParseResult = std::variant<ParsedRationale, ParseFailure>;

/// Total classifier for a raw completion. Checks run in a fixed order:
/// empty, structural parse, field presence, verdict vocabulary.
ParseResult parse_strict(std::string_view raw, TemplateKind kind);

// ---------------------------------------------------------------------------

struct AuditRecord {
  std::string id;
  TemplateKind kind = TemplateKind::Balanced;
  std::optional<std::string> completion;  // absent when the call failed
  std::string error;

  bool scored() const { return completion.has_value(); }
};

json to_json(const AuditRecord& r);
AuditRecord audit_from_json(const json& j);

/// Teacher calls against one chat endpoint. The audit log is append-only.
class Teacher {
 public:
  Teacher(lm::Client& client, lm::EndpointConfig chat, double temperature);

  /// Raw completion, recorded in the audit log; lmclient errors propagate
  /// after the instance is logged as unscored.
  std::string generate_rationale(const PromptTemplate& tmpl, const corpus::LabeledText& instance);

  /// Parallel under the endpoint's max_parallel. Returns one audit record per
  /// instance in input order; failures are captured, not thrown.
  std::vector<AuditRecord> generate_batch(const PromptTemplate& tmpl, std::span<const corpus::LabeledText> instances);

  std::vector<AuditRecord> audit() const;

 private:
  void record(AuditRecord r);

  lm::Client& client_;
  lm::EndpointConfig chat_;
  double temperature_;
  mutable std::mutex audit_mutex_;
  std::vector<AuditRecord> audit_;
};

struct JudgeScores {
  double specificity = 0.0;
  double grounding = 0.0;
  double coherence = 0.0;
};

class JudgeFailure : public Error {
 public:
  using Error::Error;
};

std::string render_judge_prompt(std::string_view rationale, std::string_view source_text);

/// Reply must be a JSON object with numeric specificity, grounding and
/// coherence fields, each in [1, 5].
std::optional<JudgeScores> parse_judge_reply(std::string_view reply);

/// One retry on an unparseable reply; throws JudgeFailure after that.
JudgeScores judge_rationale(lm::Client& client, const lm::EndpointConfig& judge, std::string_view rationale,
                            std::string_view source_text);

}  // namespace aigt::teacher
