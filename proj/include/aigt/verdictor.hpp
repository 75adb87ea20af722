#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aigt/common.hpp"
#include "aigt/corpus.hpp"
#include "aigt/lmclient.hpp"
#include "aigt/teacher.hpp"

namespace aigt::verdictor {

enum class Mode { Cot, NonCot };

std::string_view to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

enum class OutcomeKind { Verdict, FormatError, NoAnswer, TransportFailed };

std::string_view to_string(OutcomeKind k);

struct DetectionVerdict {
  std::string id;
  Mode mode = Mode::Cot;
  OutcomeKind kind = OutcomeKind::TransportFailed;
  std::optional<teacher::ParsedRationale> parsed;  // Verdict only
  std::optional<teacher::ParseFailure> failure;    // FormatError / NoAnswer
  std::string raw;
  std::string error;  // TransportFailed only

  /// Last standalone AI/HUMAN token of the raw text. Decides whether a
  /// FormatError still carries a final answer; never used for accuracy.
  std::optional<Authorship> fallback_answer() const;
};

json to_json(const DetectionVerdict& v);
/// Re-derives the outcome from the persisted raw completion.
DetectionVerdict verdict_from_json(const json& j, teacher::TemplateKind kind);

/// Last standalone uppercase AI or HUMAN token, if any.
std::optional<Authorship> fallback_final_answer(std::string_view raw);

/// Total classification of one completion under the template's structure.
DetectionVerdict classify_completion(std::string id, std::string raw, teacher::TemplateKind kind);

Mode mode_of(teacher::TemplateKind kind);

/// Temperature 0 chat call. Transport exhaustion becomes TransportFailed.
DetectionVerdict detect(lm::Client& client, const lm::EndpointConfig& chat, const corpus::LabeledText& instance,
                        const teacher::PromptTemplate& tmpl);

std::vector<DetectionVerdict> detect_batch(lm::Client& client, const lm::EndpointConfig& chat,
                                           std::span<const corpus::LabeledText> instances,
                                           const teacher::PromptTemplate& tmpl);

struct RunStats {
  std::size_t total = 0;
  std::size_t verdicts = 0;
  std::size_t format_errors = 0;
  std::size_t no_answers = 0;
  std::size_t transport_failed = 0;
  std::size_t correct = 0;

  // structural violation x missing final answer, over evaluated instances
  std::size_t structural_answerless = 0;
  std::size_t structural_answered = 0;
  std::size_t intact_answerless = 0;
  std::size_t intact_answered = 0;

  std::size_t evaluated() const { return total - transport_failed; }
  Rate accuracy() const { return {correct, verdicts}; }
  Rate fer() const { return {format_errors, evaluated()}; }
  Rate uar() const { return {structural_answerless + intact_answerless, evaluated()}; }
};

json to_json(const RunStats& s);

/// Verdicts and gold instances are matched by id; a verdict without a gold
/// record, or a count mismatch, throws ConfigError.
RunStats batch_stats(std::span<const DetectionVerdict> verdicts, std::span<const corpus::LabeledText> golds);

}  // namespace aigt::verdictor
