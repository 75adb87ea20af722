#include "aigt/scorers.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <sstream>

#include "aigt/rng.hpp"

namespace aigt::scorers {

namespace {

struct SignEntry {
  ScorerKind kind;
  std::string_view name;
  int sign;
};

// Likelihood, LRR, NPR, DetectGPT, Fast-DetectGPT and DNAGPT already grow
// with machine-likeness. Entropy, log-rank and the Binoculars ratio shrink.
constexpr SignEntry kSigns[] = {
    {ScorerKind::Likelihood, "likelihood", +1},
    {ScorerKind::Entropy, "entropy", -1},
    {ScorerKind::LogRank, "logrank", -1},
    {ScorerKind::Lrr, "lrr", +1},
    {ScorerKind::Npr, "npr", +1},
    {ScorerKind::DetectGpt, "detectgpt", +1},
    {ScorerKind::FastDetectGpt, "fast-detectgpt", +1},
    {ScorerKind::Binoculars, "binoculars", -1},
    {ScorerKind::DnaGpt, "dnagpt", +1},
};

const SignEntry& entry(ScorerKind k) {
  for (const auto& e : kSigns) {
    if (e.kind == k) return e;
  }
  throw PreconditionError("unknown scorer kind");
}

void require_tokens(const lm::ScoredText& s) {
  if (s.tokens.empty()) throw PreconditionError("cannot score a text with zero tokens");
  for (const auto& t : s.tokens) {
    if (!std::isfinite(t.logprob)) throw PreconditionError("non-finite logprob at position " + std::to_string(t.position));
  }
}

struct Outcome {
  double p;
  double lp;
  const std::string* text;  // null for the tail bucket
};

/// The truncated next-token distribution at one position: the served
/// alternatives plus a tail bucket with the residual mass.
std::vector<Outcome> distribution(const lm::TokenScore& t) {
  std::vector<Outcome> out;
  if (t.alternatives.empty()) {
    out.push_back({std::exp(t.logprob), t.logprob, &t.token_text});
  } else {
    out.reserve(t.alternatives.size() + 1);
    for (const auto& a : t.alternatives) out.push_back({std::exp(a.logprob), a.logprob, &a.token_text});
  }
  double mass = 0.0;
  for (const auto& o : out) mass += o.p;
  if (mass > 1.0) {
    const double log_mass = std::log(mass);
    for (auto& o : out) {
      o.p /= mass;
      o.lp -= log_mass;
    }
  } else if (const double tail = 1.0 - mass; tail > 1e-12) {
    out.push_back({tail, std::log(tail), nullptr});
  }
  return out;
}

double tail_logmass(const std::vector<Outcome>& d) {
  if (!d.empty() && d.back().text == nullptr) return d.back().lp;
  return std::log(kEpsilon);
}

double position_entropy(const lm::TokenScore& t) {
  double h = 0.0;
  for (const auto& o : distribution(t)) h -= o.p * o.lp;
  return h;
}

std::size_t rank_of(const lm::TokenScore& t) {
  if (t.alternatives.empty()) return 1;
  for (std::size_t i = 0; i < t.alternatives.size(); ++i) {
    if (t.alternatives[i].token_text == t.token_text) return i + 1;
  }
  return t.alternatives.size() + 1;
}

std::vector<std::string> whitespace_words(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

}  // namespace

std::string_view to_string(ScorerKind k) { return entry(k).name; }

std::optional<ScorerKind> parse_scorer_kind(std::string_view s) {
  auto key = to_lower_ascii(trim(s));
  std::replace(key.begin(), key.end(), '_', '-');
  if (key == "fastdetectgpt") key = "fast-detectgpt";
  for (const auto& e : kSigns) {
    if (e.name == key) return e.kind;
  }
  return std::nullopt;
}

int orientation_sign(ScorerKind k) { return entry(k).sign; }

bool is_single_pass(ScorerKind k) {
  switch (k) {
    case ScorerKind::Likelihood:
    case ScorerKind::Entropy:
    case ScorerKind::LogRank:
    case ScorerKind::Lrr:
    case ScorerKind::FastDetectGpt:
      return true;
    default:
      return false;
  }
}

DetectorScore oriented(ScorerKind k, std::string id, double raw) {
  if (!std::isfinite(raw)) throw PreconditionError("scorer produced a non-finite value for '" + id + "'");
  return {k, std::move(id), raw, raw * orientation_sign(k)};
}

double likelihood(const lm::ScoredText& s) {
  require_tokens(s);
  return s.total_logprob() / static_cast<double>(s.tokens.size());
}

double entropy(const lm::ScoredText& s) {
  require_tokens(s);
  double sum = 0.0;
  for (const auto& t : s.tokens) sum += position_entropy(t);
  return sum / static_cast<double>(s.tokens.size());
}

double logrank(const lm::ScoredText& s) {
  require_tokens(s);
  double sum = 0.0;
  for (const auto& t : s.tokens) sum += std::log(static_cast<double>(rank_of(t)));
  return sum / static_cast<double>(s.tokens.size());
}

double lrr(const lm::ScoredText& s) { return std::abs(likelihood(s)) / std::max(logrank(s), kEpsilon); }

double fast_detectgpt(const lm::ScoredText& s) {
  require_tokens(s);
  double ll = 0.0;
  double mean = 0.0;
  double var = 0.0;
  for (const auto& t : s.tokens) {
    const auto d = distribution(t);
    double e = 0.0;
    for (const auto& o : d) e += o.p * o.lp;
    double v = 0.0;
    for (const auto& o : d) v += o.p * (o.lp - e) * (o.lp - e);
    ll += t.logprob;
    mean += e;
    var += v;
  }
  return (ll - mean) / std::max(std::sqrt(var), kEpsilon);
}

double detectgpt(const lm::ScoredText& original, std::span<const lm::ScoredText> variants) {
  require_tokens(original);
  if (variants.empty()) throw PreconditionError("detectgpt needs at least one variant");
  std::vector<double> lls;
  lls.reserve(variants.size());
  for (const auto& v : variants) {
    require_tokens(v);
    lls.push_back(v.total_logprob());
  }
  double mean = 0.0;
  for (double x : lls) mean += x;
  mean /= static_cast<double>(lls.size());
  double ss = 0.0;
  for (double x : lls) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(lls.size()));
  return (original.total_logprob() - mean) / std::max(sd, kEpsilon);
}

double npr(const lm::ScoredText& original, std::span<const lm::ScoredText> variants) {
  if (variants.empty()) throw PreconditionError("npr needs at least one variant");
  double mean = 0.0;
  for (const auto& v : variants) mean += logrank(v);
  mean /= static_cast<double>(variants.size());
  return mean / std::max(logrank(original), kEpsilon);
}

double binoculars(const lm::ScoredText& observer, const lm::ScoredText& cross) {
  const double nll = -likelihood(observer);
  const double xnll = -likelihood(cross);
  return nll / std::max(xnll, kEpsilon);
}

lm::ScoredText cross_perplexity_text(const lm::ScoredText& observer, const lm::ScoredText& performer) {
  require_tokens(observer);
  require_tokens(performer);
  if (observer.tokens.size() != performer.tokens.size()) {
    throw PreconditionError("observer and performer tokenizations differ in length");
  }
  lm::ScoredText out;
  out.prompt_prefix = observer.prompt_prefix;
  out.tokens.reserve(observer.tokens.size());
  for (std::size_t i = 0; i < observer.tokens.size(); ++i) {
    const auto& ot = observer.tokens[i];
    const auto& pt = performer.tokens[i];
    if (ot.token_text != pt.token_text) {
      throw PreconditionError("observer and performer disagree on token " + std::to_string(i));
    }
    const auto od = distribution(ot);
    const double o_tail = tail_logmass(od);
    double ce = 0.0;
    for (const auto& p : distribution(pt)) {
      double lp = o_tail;
      if (p.text) {
        for (const auto& o : od) {
          if (o.text && *o.text == *p.text) {
            lp = o.lp;
            break;
          }
        }
      }
      ce -= p.p * lp;
    }
    out.tokens.push_back({ot.token_text, -std::max(ce, 0.0), {}, ot.position});
  }
  return out;
}

DnaSplit dna_split(std::string_view text, double prefix_fraction) {
  if (!(prefix_fraction >= 0.0 && prefix_fraction <= 1.0)) throw ConfigError("prefix fraction must be in [0, 1]");
  auto words = whitespace_words(text);
  const auto n = words.size();
  const auto cut = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(prefix_fraction * static_cast<double>(n))));
  DnaSplit out;
  // keep the original spacing of the prefix so the regeneration prompt is exact
  std::size_t pos = 0;
  for (std::size_t w = 0; w < cut; ++w) {
    pos = text.find(words[w], pos) + words[w].size();
  }
  out.prefix = std::string(text.substr(0, pos));
  out.continuation.assign(std::make_move_iterator(words.begin() + static_cast<std::ptrdiff_t>(cut)),
                          std::make_move_iterator(words.end()));
  return out;
}

double kgram_jaccard(std::span<const std::string> a, std::span<const std::string> b, std::size_t k) {
  if (k == 0) throw ConfigError("k-gram size must be positive");
  auto grams = [k](std::span<const std::string> seq) {
    std::map<std::string, std::size_t> counts;
    if (seq.empty()) return counts;
    const std::size_t width = std::min(k, seq.size());
    for (std::size_t i = 0; i + width <= seq.size(); ++i) {
      std::string g;
      for (std::size_t j = 0; j < width; ++j) {
        if (j) g += '\x1f';
        g += seq[i + j];
      }
      ++counts[g];
    }
    return counts;
  };
  const auto ga = grams(a);
  const auto gb = grams(b);
  if (ga.empty() && gb.empty()) return 1.0;
  std::size_t inter = 0;
  std::size_t uni = 0;
  auto ia = ga.begin();
  auto ib = gb.begin();
  while (ia != ga.end() || ib != gb.end()) {
    if (ib == gb.end() || (ia != ga.end() && ia->first < ib->first)) {
      uni += ia->second;
      ++ia;
    } else if (ia == ga.end() || ib->first < ia->first) {
      uni += ib->second;
      ++ib;
    } else {
      inter += std::min(ia->second, ib->second);
      uni += std::max(ia->second, ib->second);
      ++ia;
      ++ib;
    }
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double dnagpt(std::string_view text, double prefix_fraction, std::size_t k, std::span<const std::string> regenerations) {
  if (regenerations.empty()) throw PreconditionError("dnagpt needs at least one regeneration");
  const auto split = dna_split(text, prefix_fraction);
  if (split.continuation.empty()) throw PreconditionError("text leaves no continuation after the prefix");
  double sum = 0.0;
  for (const auto& r : regenerations) sum += kgram_jaccard(split.continuation, whitespace_words(r), k);
  return sum / static_cast<double>(regenerations.size());
}

PerturbationSet perturb(std::string_view text, std::size_t n, const VariantRewriter& rewriter, std::uint64_t seed,
                        std::string generator) {
  if (text.empty()) throw PreconditionError("cannot perturb empty text");
  if (n == 0) throw PreconditionError("at least one perturbation is required");
  PerturbationSet out{std::string(text), {}, std::move(generator)};
  out.variants.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto v = rewriter(text, mix_seed(seed, std::to_string(i)));
    if (v == text) throw PreconditionError("perturbation " + std::to_string(i) + " is identical to the original");
    out.variants.push_back(std::move(v));
  }
  return out;
}

std::pair<std::string, std::size_t> mask_spans(std::string_view text, std::uint64_t seed, double mask_fraction,
                                               std::size_t span_words) {
  if (span_words == 0) throw ConfigError("span length must be positive");
  auto words = whitespace_words(text);
  if (words.empty()) throw PreconditionError("cannot mask spans of empty text");
  const std::size_t blocks = (words.size() + span_words - 1) / span_words;
  const auto want = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(mask_fraction * static_cast<double>(words.size()) /
                                            static_cast<double>(span_words))),
      1, blocks);
  std::vector<std::size_t> order(blocks);
  for (std::size_t i = 0; i < blocks; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> masked(blocks, false);
  for (std::size_t i = 0; i < want; ++i) masked[order[i]] = true;

  std::string out;
  std::size_t blank = 0;
  for (std::size_t b = 0; b < blocks; ++b) {
    if (!out.empty()) out += ' ';
    if (masked[b]) {
      out += "<blank_" + std::to_string(++blank) + ">";
      continue;
    }
    for (std::size_t w = b * span_words; w < std::min(words.size(), (b + 1) * span_words); ++w) {
      if (w != b * span_words) out += ' ';
      out += words[w];
    }
  }
  return {out, blank};
}

VariantRewriter make_span_rewriter(lm::Client& client, lm::EndpointConfig chat, double mask_fraction,
                                   std::size_t span_words) {
  return [&client, chat = std::move(chat), mask_fraction, span_words](std::string_view text, std::uint64_t seed) {
    const auto [masked, blanks] = mask_spans(text, seed, mask_fraction, span_words);
    std::string prompt = "Fill in each of the " + std::to_string(blanks) +
                         " numbered blanks (<blank_1>, <blank_2>, ...) with a few words so the passage reads "
                         "naturally. Reply with the completed passage only.\n\n";
    prompt += masked;
    return trim(client.chat_complete(chat, "", prompt, 1.0, seed));
  };
}

std::vector<std::string> regenerate_continuations(lm::Client& client, const lm::EndpointConfig& chat,
                                                  std::string_view prefix, std::size_t target_words,
                                                  std::size_t count, std::uint64_t seed) {
  std::string prompt = "Continue the following text with about " + std::to_string(target_words) +
                       " more words. Reply with the continuation only.\n\n";
  prompt += prefix;
  std::vector<std::string> out(count);
  auto errors = lm::run_bounded(count, chat.max_parallel, [&](std::size_t i) {
    out[i] = trim(client.chat_complete(chat, "", prompt, 1.0, mix_seed(seed, std::to_string(i))));
  });
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<double> score_batch(ScorerKind k, std::span<const lm::ScoredText> texts, Exec exec) {
  if (!is_single_pass(k)) throw PreconditionError(std::string(to_string(k)) + " needs more than one scored text");
  double (*fn)(const lm::ScoredText&) = nullptr;
  switch (k) {
    case ScorerKind::Likelihood:
      fn = &likelihood;
      break;
    case ScorerKind::Entropy:
      fn = &entropy;
      break;
    case ScorerKind::LogRank:
      fn = &logrank;
      break;
    case ScorerKind::Lrr:
      fn = &lrr;
      break;
    default:
      fn = &fast_detectgpt;
      break;
  }
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
  std::vector<double> out(texts.size());
  std::vector<std::exception_ptr> errors(texts.size());
  const bool parallel = exec == Exec::Parallel;
#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      out[i] = fn(texts[i]);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace aigt::scorers
