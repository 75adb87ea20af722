#pragma once

#include <string>
#include <vector>

#include "aigt/evalharness.hpp"
#include "aigt/rng.hpp"

namespace testing {

/// n scored instances over `domains` domains. Scores come from a coarse
/// grid half the time so ties are common; AI instances sit slightly higher.
inline std::vector<aigt::eval::ScoredInstance> random_scored(aigt::Rng& rng, std::size_t n, std::size_t domains) {
  std::vector<aigt::eval::ScoredInstance> out(n);
  const bool coarse = rng.bounded(2) == 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = out[i];
    s.id = "x" + std::to_string(i);
    s.domain = "d" + std::to_string(rng.bounded(domains));
    s.gold = rng.bounded(2) ? aigt::Authorship::Ai : aigt::Authorship::Human;
    const double shift = s.gold == aigt::Authorship::Ai ? 0.5 : 0.0;
    s.score = coarse ? static_cast<double>(rng.bounded(12)) * 0.25 + shift : (rng.uniform() + rng.uniform() + rng.uniform() - 1.5) + shift;
    s.tokens = 50 + rng.bounded(700);
  }
  return out;
}

inline std::vector<double> scores_of(const std::vector<aigt::eval::ScoredInstance>& xs) {
  std::vector<double> v;
  for (const auto& x : xs) v.push_back(x.score);
  return v;
}

inline std::vector<aigt::Authorship> golds_of(const std::vector<aigt::eval::ScoredInstance>& xs) {
  std::vector<aigt::Authorship> v;
  for (const auto& x : xs) v.push_back(x.gold);
  return v;
}

}  // namespace testing
