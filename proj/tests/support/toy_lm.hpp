#pragma once

// Deterministic stand-in for a language model, shared by the stub server and
// by tests that want ScoredText values without HTTP.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "aigt/lmclient.hpp"
#include "aigt/rng.hpp"

namespace toy {

/// Tokens are a whitespace run plus the following word, so concatenating
/// them gives back the input byte for byte.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

inline double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

struct Position {
  std::string observed;
  double logprob = 0.0;
  std::vector<aigt::lm::TokenAlternative> top;  // descending
};

/// Next-token distribution at one position: the observed token gets
/// probability p in [0.05, 0.65); the rest is spread geometrically over
/// synthetic tokens. Words starting with a lowercase vowel are "predictable"
/// and get the upper half of the range.
inline Position position(const std::string& prev, const std::string& tok, int top_k) {
  const auto h = aigt::mix_seed(aigt::fnv1a64(prev), tok);
  double u = unit(h);
  std::string_view word = tok;
  while (!word.empty() && std::isspace(static_cast<unsigned char>(word.front()))) word.remove_prefix(1);
  const bool predictable = !word.empty() && std::string_view("aeiou").find(word.front()) != std::string_view::npos;
  const double p = predictable ? 0.35 + 0.3 * u : 0.05 + 0.3 * u;
  std::vector<aigt::lm::TokenAlternative> all{{tok, std::log(p)}};
  double rest = 1.0 - p;
  for (int j = 0; j < top_k; ++j) {
    rest *= 0.5;
    all.push_back({" <alt" + std::to_string(j) + ">", std::log(rest)});
  }
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.logprob > b.logprob; });
  all.resize(static_cast<std::size_t>(top_k));
  return {tok, std::log(p), std::move(all)};
}

/// OpenAI-style legacy completions body for an echoed prompt.
inline aigt::json completions_body(std::string_view prompt, int top_k) {
  const auto toks = tokenize(prompt);
  aigt::json tokens = aigt::json::array(), lps = aigt::json::array(), tops = aigt::json::array();
  std::string prev = "<s>";
  for (std::size_t i = 0; i < toks.size(); ++i) {
    tokens.push_back(toks[i]);
    if (i == 0) {
      lps.push_back(nullptr);
      tops.push_back(nullptr);
    } else {
      const auto pos = position(prev, toks[i], top_k);
      lps.push_back(pos.logprob);
      aigt::json t = aigt::json::object();
      for (const auto& a : pos.top) t[a.token_text] = a.logprob;
      tops.push_back(std::move(t));
    }
    prev = toks[i];
  }
  return {{"object", "text_completion"},
          {"choices",
           {{{"index", 0},
             {"text", std::string(prompt)},
             {"logprobs", {{"tokens", tokens}, {"token_logprobs", lps}, {"top_logprobs", tops}}}}}}};
}

/// The ScoredText the client would produce for `text` with an empty prefix.
inline aigt::lm::ScoredText scored(std::string_view text, int top_k = 5) {
  return aigt::lm::parse_score_response(completions_body(text, top_k).dump(), "", text);
}

/// Bag-of-hashed-words embedding, L2-normalized.
inline std::vector<double> embedding(std::string_view text, std::size_t dim = 16) {
  std::vector<double> v(dim, 0.0);
  for (const auto& t : tokenize(text)) {
    std::string w;
    for (char c : t) {
      if (!std::isspace(static_cast<unsigned char>(c))) w += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    const auto h = aigt::fnv1a64(w);
    v[h % dim] += (h >> 32) & 1 ? 1.0 : -1.0;
  }
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0) {
    for (double& x : v) x /= n;
  }
  return v;
}

}  // namespace toy
