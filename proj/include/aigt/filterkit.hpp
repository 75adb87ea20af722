#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aigt/common.hpp"
#include "aigt/corpus.hpp"
#include "aigt/teacher.hpp"

namespace aigt::filterkit {

enum class Category { Retained, WrongPrediction, ParseError };

std::string_view to_string(Category c);

struct FilterOutcome {
  Category category = Category::ParseError;
  corpus::LabeledText instance;
  std::optional<teacher::ParsedRationale> parsed;
  std::optional<teacher::ParseFailure> failure;
};

FilterOutcome categorize(const corpus::LabeledText& instance, const teacher::ParseResult& result);

struct SftExample {
  corpus::LabeledText source;  // label is the gold authorship
  std::string rationale;
};

enum class GrpoOrigin { WrongPrediction, ParseError, Pool };

std::string_view to_string(GrpoOrigin o);

struct GrpoExample {
  corpus::LabeledText source;  // never carries a rationale
  GrpoOrigin origin = GrpoOrigin::Pool;
};

struct FilterReport {
  std::size_t retained = 0;
  std::size_t wrong_prediction = 0;
  std::size_t parse_error = 0;
  std::map<std::string, std::size_t> parse_error_kinds;
  std::size_t pool = 0;
  std::size_t sft_size = 0;
  std::size_t grpo_size = 0;

  std::size_t prompted() const { return retained + wrong_prediction + parse_error; }
  Rate retained_share() const { return {retained, prompted()}; }
  Rate wrong_share() const { return {wrong_prediction, prompted()}; }
  Rate parse_error_share() const { return {parse_error, prompted()}; }
};

json to_json(const FilterReport& r);

struct Datasets {
  std::vector<SftExample> sft;
  std::vector<GrpoExample> grpo;
  FilterReport report;
};

/// SFT = retained outcomes; GRPO = the other outcomes with rationales
/// stripped, plus the untouched pool. Both outputs are sorted by id.
/// Throws ConfigError when an id repeats within the outcomes or appears in
/// both the outcomes and the pool.
Datasets build_datasets(std::span<const FilterOutcome> outcomes, std::span<const corpus::LabeledText> pool);

corpus::LabeledText to_record(const SftExample& e);
corpus::LabeledText to_record(const GrpoExample& e);

}  // namespace aigt::filterkit
