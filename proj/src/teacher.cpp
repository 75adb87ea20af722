#include "aigt/teacher.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "aigt/embedded_assets.hpp"
#include "aigt/strict_json.hpp"

namespace aigt::teacher {

namespace {

struct KindName {
  TemplateKind kind;
  std::string_view name;
};

constexpr std::array<KindName, 5> kKindNames{{
    {TemplateKind::Balanced, "balanced"},
    {TemplateKind::Concise, "concise"},
    {TemplateKind::Rubric, "rubric"},
    {TemplateKind::OneShot, "oneshot"},
    {TemplateKind::NonCot, "noncot"},
}};

struct FailureName {
  FailureKind kind;
  std::string_view name;
};

constexpr std::array<FailureName, 8> kFailureNames{{
    {FailureKind::Empty, "EMPTY"},
    {FailureKind::Incomplete, "INCOMPLETE"},
    {FailureKind::UnescapedQuote, "UNESCAPED_QUOTE"},
    {FailureKind::ExtraClosing, "EXTRA_CLOSING"},
    {FailureKind::Malformed, "MALFORMED"},
    {FailureKind::MissingField, "MISSING_FIELD"},
    {FailureKind::UnexpectedField, "UNEXPECTED_FIELD"},
    {FailureKind::BadVerdict, "BAD_VERDICT"},
}};

std::string_view instruction_block(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::Balanced:
      return assets::prompt_balanced;
    case TemplateKind::Concise:
      return assets::prompt_concise;
    case TemplateKind::Rubric:
      return assets::prompt_rubric;
    case TemplateKind::OneShot:
      return assets::prompt_oneshot;
    case TemplateKind::NonCot:
      break;
  }
  return assets::prompt_noncot;
}

std::size_t count_slots(std::string_view body) {
  std::size_t n = 0;
  for (auto pos = body.find(kTextSlot); pos != std::string_view::npos; pos = body.find(kTextSlot, pos + kTextSlot.size())) {
    ++n;
  }
  return n;
}

FailureKind from_structural(strict_json::ErrorKind k) {
  switch (k) {
    case strict_json::ErrorKind::Incomplete:
      return FailureKind::Incomplete;
    case strict_json::ErrorKind::UnescapedQuote:
      return FailureKind::UnescapedQuote;
    case strict_json::ErrorKind::ExtraClosing:
      return FailureKind::ExtraClosing;
    case strict_json::ErrorKind::Malformed:
      break;
  }
  return FailureKind::Malformed;
}

const strict_json::Value* find_field(const strict_json::Object& obj, std::string_view name) {
  for (const auto& [k, v] : obj) {
    if (k == name) return &v;
  }
  return nullptr;
}

}  // namespace

std::string_view to_string(TemplateKind k) {
  for (const auto& e : kKindNames) {
    if (e.kind == k) return e.name;
  }
  return "balanced";
}

std::optional<TemplateKind> parse_template_kind(std::string_view s) {
  auto key = to_lower_ascii(trim(s));
  key.erase(std::remove(key.begin(), key.end(), '-'), key.end());
  if (key == "cot") return TemplateKind::Balanced;
  for (const auto& e : kKindNames) {
    if (e.name == key) return e.kind;
  }
  return std::nullopt;
}

bool demands_rationale(TemplateKind k) { return k != TemplateKind::NonCot; }

std::string_view to_string(FailureKind k) {
  for (const auto& e : kFailureNames) {
    if (e.kind == k) return e.name;
  }
  return "MALFORMED";
}

std::optional<FailureKind> parse_failure_kind(std::string_view s) {
  for (const auto& e : kFailureNames) {
    if (e.name == s) return e.kind;
  }
  return std::nullopt;
}

bool is_structural(const ParseFailure& f) {
  switch (f.kind) {
    case FailureKind::BadVerdict:
      return false;
    case FailureKind::MissingField:
      return f.field != "verdict";
    default:
      return true;
  }
}

PromptTemplate PromptTemplate::builtin(TemplateKind kind) {
  std::string body(instruction_block(kind));
  body += "\nText:\n";
  body += kTextSlot;
  body += "\n";
  return {kind, std::move(body)};
}

PromptTemplate PromptTemplate::custom(TemplateKind kind, std::string body) {
  if (count_slots(body) != 1) throw ConfigError("prompt template must contain exactly one {{TEXT}} slot");
  return {kind, std::move(body)};
}

std::string render_prompt(const PromptTemplate& tmpl, std::string_view text) {
  if (text.empty()) throw PreconditionError("cannot render a prompt for empty text");
  const auto pos = tmpl.body.find(kTextSlot);
  if (pos == std::string::npos) throw ConfigError("prompt template has no {{TEXT}} slot");
  std::string out;
  out.reserve(tmpl.body.size() + text.size());
  out.append(tmpl.body, 0, pos);
  out.append(text);
  out.append(tmpl.body, pos + kTextSlot.size());
  return out;
}

ParseResult parse_strict(std::string_view raw, TemplateKind kind) {
  if (trim(raw).empty()) return ParseFailure{FailureKind::Empty, "empty output", ""};

  auto parsed = strict_json::parse(raw);
  if (auto* err = std::get_if<strict_json::ParseError>(&parsed)) {
    return ParseFailure{from_structural(err->kind), err->detail + " at offset " + std::to_string(err->offset), ""};
  }
  const auto& doc = std::get<strict_json::Value>(parsed);
  if (!doc.is_object()) return ParseFailure{FailureKind::Malformed, "top-level value is not an object", ""};
  const auto& obj = doc.as_object();

  const bool wants_rationale = demands_rationale(kind);
  if (wants_rationale && !find_field(obj, "rationale")) {
    return ParseFailure{FailureKind::MissingField, "missing field 'rationale'", "rationale"};
  }
  const auto* verdict = find_field(obj, "verdict");
  if (!verdict) return ParseFailure{FailureKind::MissingField, "missing field 'verdict'", "verdict"};
  for (const auto& [k, v] : obj) {
    if (k != "verdict" && !(wants_rationale && k == "rationale")) {
      return ParseFailure{FailureKind::UnexpectedField, "unexpected field '" + k + "'", k};
    }
  }

  ParsedRationale out;
  out.raw = std::string(raw);
  if (wants_rationale) {
    const auto* r = find_field(obj, "rationale");
    if (!r->is_string() || trim(r->as_string()).empty()) {
      return ParseFailure{FailureKind::MissingField, "field 'rationale' must be a non-empty string", "rationale"};
    }
    out.rationale = r->as_string();
  }

  if (!verdict->is_string()) return ParseFailure{FailureKind::BadVerdict, "field 'verdict' is not a string", "verdict"};
  const auto& v = verdict->as_string();
  auto label = parse_authorship(v);
  if (!label) return ParseFailure{FailureKind::BadVerdict, "verdict '" + v + "' is not AI or HUMAN", "verdict"};
  out.verdict = *label;
  out.normalized = v != to_string(*label);
  if (out.normalized) spdlog::debug("verdict '{}' normalized to {}", v, to_string(*label));
  return out;
}

// ---------------------------------------------------------------------------

json to_json(const AuditRecord& r) {
  json j{{"id", r.id}, {"template", std::string(to_string(r.kind))}};
  if (r.completion) {
    j["status"] = "ok";
    j["completion"] = *r.completion;
  } else {
    j["status"] = "unscored";
    j["error"] = r.error;
  }
  return j;
}

AuditRecord audit_from_json(const json& j) {
  AuditRecord r;
  r.id = j.at("id").get<std::string>();
  auto kind = parse_template_kind(j.value("template", "balanced"));
  if (!kind) throw ConfigError("audit record '" + r.id + "': unknown template");
  r.kind = *kind;
  if (j.value("status", "ok") == "ok" && j.contains("completion") && j.at("completion").is_string()) {
    r.completion = j.at("completion").get<std::string>();
  } else {
    r.error = j.value("error", "unscored");
  }
  return r;
}

Teacher::Teacher(lm::Client& client, lm::EndpointConfig chat, double temperature)
    : client_(client), chat_(std::move(chat)), temperature_(temperature) {}

void Teacher::record(AuditRecord r) {
  std::lock_guard lock(audit_mutex_);
  audit_.push_back(std::move(r));
}

std::vector<AuditRecord> Teacher::audit() const {
  std::lock_guard lock(audit_mutex_);
  return audit_;
}

std::string Teacher::generate_rationale(const PromptTemplate& tmpl, const corpus::LabeledText& instance) {
  const auto prompt = render_prompt(tmpl, instance.text);
  try {
    auto completion = client_.chat_complete(chat_, "", prompt, temperature_);
    record({instance.id, tmpl.kind, completion, ""});
    return completion;
  } catch (const Error& e) {
    record({instance.id, tmpl.kind, std::nullopt, e.what()});
    throw;
  }
}

std::vector<AuditRecord> Teacher::generate_batch(const PromptTemplate& tmpl,
                                                 std::span<const corpus::LabeledText> instances) {
  std::vector<AuditRecord> out(instances.size());
  auto errors = lm::run_bounded(instances.size(), chat_.max_parallel, [&](std::size_t i) {
    out[i] = {instances[i].id, tmpl.kind, generate_rationale(tmpl, instances[i]), ""};
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const NetworkError& e) {
      out[i] = {instances[i].id, tmpl.kind, std::nullopt, e.what()};
    }
    // other errors (config, protocol) are not per-instance; let them surface
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string render_judge_prompt(std::string_view rationale, std::string_view source_text) {
  std::string p =
      "You are evaluating an explanation written by a detector that decided whether a passage was AI-generated "
      "or human-written.\n"
      "Score the explanation on three dimensions, each an integer from 1 (poor) to 5 (excellent):\n"
      "- specificity: does it give concrete, non-generic evidence?\n"
      "- grounding: is every claim supported by the passage itself?\n"
      "- coherence: is it logically organized and consistent with its final decision?\n"
      "Return STRICT JSON only:\n"
      "{\n  \"specificity\": 1-5,\n  \"grounding\": 1-5,\n  \"coherence\": 1-5\n}\n\n"
      "Passage:\n";
  p += source_text;
  p += "\n\nExplanation:\n";
  p += rationale;
  p += "\n";
  return p;
}

std::optional<JudgeScores> parse_judge_reply(std::string_view reply) {
  json j;
  try {
    j = json::parse(trim(reply));
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
  if (!j.is_object()) return std::nullopt;
  JudgeScores s;
  for (auto [name, dest] : {std::pair{"specificity", &s.specificity}, std::pair{"grounding", &s.grounding},
                            std::pair{"coherence", &s.coherence}}) {
    auto it = j.find(name);
    if (it == j.end() || !it->is_number()) return std::nullopt;
    const double v = it->get<double>();
    if (!std::isfinite(v) || v < 1.0 || v > 5.0) return std::nullopt;
    *dest = v;
  }
  return s;
}

JudgeScores judge_rationale(lm::Client& client, const lm::EndpointConfig& judge, std::string_view rationale,
                            std::string_view source_text) {
  const auto prompt = render_judge_prompt(rationale, source_text);
  std::string last;
  for (std::uint64_t attempt = 0; attempt < 2; ++attempt) {
    // the retry carries a distinct seed so it is not answered from cache
    last = client.chat_complete(judge, "", prompt, 0.0, attempt == 0 ? std::nullopt : std::optional{attempt});
    if (auto s = parse_judge_reply(last)) return *s;
  }
  throw JudgeFailure("judge reply unparseable after retry: " + last.substr(0, 200));
}

}  // namespace aigt::teacher
