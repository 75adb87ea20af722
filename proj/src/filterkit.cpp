#include "aigt/filterkit.hpp"

#include <algorithm>
#include <unordered_set>

namespace aigt::filterkit {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::Retained:
      return "RETAINED";
    case Category::WrongPrediction:
      return "WRONG_PREDICTION";
    case Category::ParseError:
      break;
  }
  return "PARSE_ERROR";
}

std::string_view to_string(GrpoOrigin o) {
  switch (o) {
    case GrpoOrigin::WrongPrediction:
      return "wrong_prediction";
    case GrpoOrigin::ParseError:
      return "parse_error";
    case GrpoOrigin::Pool:
      break;
  }
  return "pool";
}

FilterOutcome categorize(const corpus::LabeledText& instance, const teacher::ParseResult& result) {
  FilterOutcome out;
  out.instance = instance;
  if (const auto* p = std::get_if<teacher::ParsedRationale>(&result)) {
    out.category = p->verdict == instance.label ? Category::Retained : Category::WrongPrediction;
    out.parsed = *p;
  } else {
    out.category = Category::ParseError;
    out.failure = std::get<teacher::ParseFailure>(result);
  }
  return out;
}

json to_json(const FilterReport& r) {
  return json{{"counts",
               {{"RETAINED", r.retained}, {"WRONG_PREDICTION", r.wrong_prediction}, {"PARSE_ERROR", r.parse_error}}},
              {"proportions",
               {{"RETAINED", rate_json(r.retained_share())},
                {"WRONG_PREDICTION", rate_json(r.wrong_share())},
                {"PARSE_ERROR", rate_json(r.parse_error_share())}}},
              {"parse_error_kinds", r.parse_error_kinds},
              {"prompted", r.prompted()},
              {"pool", r.pool},
              {"sft_size", r.sft_size},
              {"grpo_size", r.grpo_size}};
}

Datasets build_datasets(std::span<const FilterOutcome> outcomes, std::span<const corpus::LabeledText> pool) {
  std::unordered_set<std::string> prompted;
  prompted.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (!prompted.insert(o.instance.id).second) {
      throw ConfigError("instance '" + o.instance.id + "' appears twice among filter outcomes");
    }
  }
  std::unordered_set<std::string> pooled;
  pooled.reserve(pool.size());
  for (const auto& p : pool) {
    if (prompted.count(p.id)) {
      throw ConfigError("instance '" + p.id + "' is in both the prompted subset and the remaining pool");
    }
    if (!pooled.insert(p.id).second) throw ConfigError("instance '" + p.id + "' appears twice in the pool");
  }

  Datasets d;
  auto strip = [](corpus::LabeledText t) {
    t.rationale.reset();
    return t;
  };
  for (const auto& o : outcomes) {
    switch (o.category) {
      case Category::Retained:
        if (!o.parsed || trim(o.parsed->rationale).empty()) {
          throw PreconditionError("retained instance '" + o.instance.id + "' has no rationale");
        }
        ++d.report.retained;
        d.sft.push_back({o.instance, o.parsed->rationale});
        break;
      case Category::WrongPrediction:
        ++d.report.wrong_prediction;
        d.grpo.push_back({strip(o.instance), GrpoOrigin::WrongPrediction});
        break;
      case Category::ParseError:
        ++d.report.parse_error;
        if (o.failure) ++d.report.parse_error_kinds[std::string(teacher::to_string(o.failure->kind))];
        d.grpo.push_back({strip(o.instance), GrpoOrigin::ParseError});
        break;
    }
  }
  for (const auto& p : pool) d.grpo.push_back({strip(p), GrpoOrigin::Pool});

  std::sort(d.sft.begin(), d.sft.end(), [](const auto& a, const auto& b) { return a.source.id < b.source.id; });
  std::sort(d.grpo.begin(), d.grpo.end(), [](const auto& a, const auto& b) { return a.source.id < b.source.id; });
  d.report.pool = pool.size();
  d.report.sft_size = d.sft.size();
  d.report.grpo_size = d.grpo.size();
  return d;
}

corpus::LabeledText to_record(const SftExample& e) {
  auto r = e.source;
  r.rationale = e.rationale;
  return r;
}

corpus::LabeledText to_record(const GrpoExample& e) { return e.source; }

}  // namespace aigt::filterkit
