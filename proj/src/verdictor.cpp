#include "aigt/verdictor.hpp"

#include <cctype>
#include <unordered_map>

namespace aigt::verdictor {

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

}  // namespace

std::string_view to_string(Mode m) { return m == Mode::Cot ? "cot" : "noncot"; }

std::optional<Mode> parse_mode(std::string_view s) {
  const auto key = to_lower_ascii(trim(s));
  if (key == "cot") return Mode::Cot;
  if (key == "noncot" || key == "non-cot" || key == "non_cot") return Mode::NonCot;
  return std::nullopt;
}

std::string_view to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Verdict:
      return "VERDICT";
    case OutcomeKind::FormatError:
      return "FORMAT_ERROR";
    case OutcomeKind::NoAnswer:
      return "NO_ANSWER";
    case OutcomeKind::TransportFailed:
      break;
  }
  return "TRANSPORT_FAILED";
}

std::optional<Authorship> fallback_final_answer(std::string_view raw) {
  std::optional<Authorship> last;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (i > 0 && word_char(raw[i - 1])) continue;
    for (auto [word, label] : {std::pair{std::string_view("HUMAN"), Authorship::Human},
                               std::pair{std::string_view("AI"), Authorship::Ai}}) {
      if (raw.substr(i, word.size()) != word) continue;
      const auto end = i + word.size();
      if (end < raw.size() && word_char(raw[end])) continue;
      last = label;
    }
  }
  return last;
}

std::optional<Authorship> DetectionVerdict::fallback_answer() const {
  if (kind != OutcomeKind::FormatError) return std::nullopt;
  return fallback_final_answer(raw);
}

Mode mode_of(teacher::TemplateKind kind) { return teacher::demands_rationale(kind) ? Mode::Cot : Mode::NonCot; }

DetectionVerdict classify_completion(std::string id, std::string raw, teacher::TemplateKind kind) {
  DetectionVerdict v;
  v.id = std::move(id);
  v.mode = mode_of(kind);
  auto result = teacher::parse_strict(raw, kind);
  if (auto* p = std::get_if<teacher::ParsedRationale>(&result)) {
    v.kind = OutcomeKind::Verdict;
    v.parsed = std::move(*p);
  } else {
    auto& f = std::get<teacher::ParseFailure>(result);
    v.kind = teacher::is_structural(f) ? OutcomeKind::FormatError : OutcomeKind::NoAnswer;
    v.failure = std::move(f);
  }
  v.raw = std::move(raw);
  return v;
}

json to_json(const DetectionVerdict& v) {
  json j{{"id", v.id}, {"mode", std::string(to_string(v.mode))}, {"outcome", std::string(to_string(v.kind))}};
  if (v.kind == OutcomeKind::TransportFailed) {
    j["error"] = v.error;
    return j;
  }
  j["completion"] = v.raw;
  if (v.parsed) {
    j["verdict"] = std::string(to_string(v.parsed->verdict));
    j["rationale"] = v.parsed->rationale;
    j["normalized"] = v.parsed->normalized;
  }
  if (v.failure) {
    j["failure"] = std::string(teacher::to_string(v.failure->kind));
    j["detail"] = v.failure->detail;
  }
  if (auto fb = v.fallback_answer()) j["fallback_answer"] = std::string(to_string(*fb));
  return j;
}

DetectionVerdict verdict_from_json(const json& j, teacher::TemplateKind kind) {
  const auto id = j.at("id").get<std::string>();
  if (j.value("outcome", "") == "TRANSPORT_FAILED" || !j.contains("completion")) {
    DetectionVerdict v;
    v.id = id;
    v.mode = mode_of(kind);
    v.error = j.value("error", "no completion");
    return v;
  }
  return classify_completion(id, j.at("completion").get<std::string>(), kind);
}

DetectionVerdict detect(lm::Client& client, const lm::EndpointConfig& chat, const corpus::LabeledText& instance,
                        const teacher::PromptTemplate& tmpl) {
  const auto prompt = teacher::render_prompt(tmpl, instance.text);
  try {
    return classify_completion(instance.id, client.chat_complete(chat, "", prompt, 0.0), tmpl.kind);
  } catch (const NetworkError& e) {
    DetectionVerdict v;
    v.id = instance.id;
    v.mode = mode_of(tmpl.kind);
    v.error = e.what();
    return v;
  }
}

std::vector<DetectionVerdict> detect_batch(lm::Client& client, const lm::EndpointConfig& chat,
                                           std::span<const corpus::LabeledText> instances,
                                           const teacher::PromptTemplate& tmpl) {
  std::vector<DetectionVerdict> out(instances.size());
  auto errors = lm::run_bounded(instances.size(), chat.max_parallel,
                                [&](std::size_t i) { out[i] = detect(client, chat, instances[i], tmpl); });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

json to_json(const RunStats& s) {
  return json{{"total", s.total},
              {"evaluated", s.evaluated()},
              {"counts",
               {{"VERDICT", s.verdicts},
                {"FORMAT_ERROR", s.format_errors},
                {"NO_ANSWER", s.no_answers},
                {"TRANSPORT_FAILED", s.transport_failed}}},
              {"correct", s.correct},
              {"accuracy", rate_json(s.accuracy())},
              {"fer", rate_json(s.fer())},
              {"uar", rate_json(s.uar())},
              {"breakdown",
               {{"structural_answerless", s.structural_answerless},
                {"structural_answered", s.structural_answered},
                {"intact_answerless", s.intact_answerless},
                {"intact_answered", s.intact_answered}}}};
}

RunStats batch_stats(std::span<const DetectionVerdict> verdicts, std::span<const corpus::LabeledText> golds) {
  if (verdicts.size() != golds.size()) {
    throw ConfigError("verdict count " + std::to_string(verdicts.size()) + " does not match gold count " +
                      std::to_string(golds.size()));
  }
  std::unordered_map<std::string, Authorship> gold;
  gold.reserve(golds.size());
  for (const auto& g : golds) gold.emplace(g.id, g.label);

  RunStats s;
  s.total = verdicts.size();
  for (const auto& v : verdicts) {
    auto it = gold.find(v.id);
    if (it == gold.end()) throw ConfigError("verdict for unknown instance '" + v.id + "'");
    switch (v.kind) {
      case OutcomeKind::Verdict:
        ++s.verdicts;
        ++s.intact_answered;
        if (v.parsed && v.parsed->verdict == it->second) ++s.correct;
        break;
      case OutcomeKind::FormatError:
        ++s.format_errors;
        if (v.fallback_answer()) ++s.structural_answered;
        else ++s.structural_answerless;
        break;
      case OutcomeKind::NoAnswer:
        ++s.no_answers;
        ++s.intact_answerless;
        break;
      case OutcomeKind::TransportFailed:
        ++s.transport_failed;
        break;
    }
  }
  return s;
}

}  // namespace aigt::verdictor
