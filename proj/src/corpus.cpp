#include "aigt/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "aigt/embedded_assets.hpp"
#include "aigt/rng.hpp"
#include "aigt/utf8.hpp"

namespace aigt::corpus {

std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train:
      return "train";
    case Split::Test:
      return "test";
    case Split::Unassigned:
      break;
  }
  return "unassigned";
}

json to_json(const LabeledText& t) {
  json j;
  j["id"] = t.id;
  j["text"] = t.text;
  j["label"] = std::string(to_string(t.label));
  j["domain"] = t.domain;
  if (t.generator) j["generator"] = *t.generator;
  j["split"] = std::string(to_string(t.split));
  if (t.rationale) j["rationale"] = *t.rationale;
  if (t.attack) j["attack"] = *t.attack;
  return j;
}

CorpusStats compute_stats(std::span<const LabeledText> records) {
  CorpusStats s;
  for (const auto& r : records) {
    ++s.per_domain[r.domain];
    if (r.label == Authorship::Ai) {
      ++s.ai_count;
      ++s.per_generator[r.generator.value_or("unknown")];
    } else {
      ++s.human_count;
    }
  }
  return s;
}

json to_json(const CorpusStats& s) {
  json j;
  j["total"] = s.total();
  j["human_count"] = s.human_count;
  j["ai_count"] = s.ai_count;
  j["per_domain"] = s.per_domain;
  j["per_generator"] = s.per_generator;
  return j;
}

namespace {

std::optional<std::string> optional_string(const json& rec, const char* field, std::string& error) {
  auto it = rec.find(field);
  if (it == rec.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    error = std::string("field '") + field + "' must be a string";
    return std::nullopt;
  }
  return it->get<std::string>();
}

}  // namespace

LoadedCorpus parse_corpus(std::istream& in) {
  LoadedCorpus out;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto reject = [&](std::string reason) { out.rejections.push_back({line_no, std::move(reason)}); };

    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      reject(std::string("invalid JSON: ") + e.what());
      continue;
    }
    if (!rec.is_object()) {
      reject("record is not a JSON object");
      continue;
    }
    std::string error;
    LabeledText t;

    auto text = optional_string(rec, "text", error);
    if (!error.empty()) {
      reject(error);
      continue;
    }
    if (!text || text->empty()) {
      reject("missing required field 'text'");
      continue;
    }
    t.text = std::move(*text);

    auto label = optional_string(rec, "label", error);
    if (!error.empty()) {
      reject(error);
      continue;
    }
    if (!label) {
      reject("missing required field 'label'");
      continue;
    }
    auto parsed_label = parse_authorship(*label);
    if (!parsed_label) {
      reject("field 'label' must be HUMAN or AI, got '" + *label + "'");
      continue;
    }
    t.label = *parsed_label;

    auto id = optional_string(rec, "id", error);
    auto domain = optional_string(rec, "domain", error);
    auto generator = optional_string(rec, "generator", error);
    auto split = optional_string(rec, "split", error);
    t.rationale = optional_string(rec, "rationale", error);
    t.attack = optional_string(rec, "attack", error);
    if (!error.empty()) {
      reject(error);
      continue;
    }
    t.id = id.value_or("L" + std::to_string(line_no));
    if (seen.count(t.id) != 0) {
      reject("duplicate id '" + t.id + "'");
      continue;
    }
    t.domain = domain.value_or("unknown");
    if (split) {
      const auto s = to_lower_ascii(*split);
      if (s == "train") {
        t.split = Split::Train;
      } else if (s == "test") {
        t.split = Split::Test;
      } else if (s == "unassigned" || s.empty()) {
        t.split = Split::Unassigned;
      } else {
        reject("field 'split' must be train, test or unassigned, got '" + *split + "'");
        continue;
      }
    }
    if (t.label == Authorship::Ai) {
      if (!generator || generator->empty()) {
        out.warnings.push_back("line " + std::to_string(line_no) + ": AI record without generator, using 'unknown'");
        generator = "unknown";
      }
      t.generator = std::move(generator);
    } else if (generator) {
      out.warnings.push_back("line " + std::to_string(line_no) + ": generator dropped from HUMAN record");
    }
    seen.insert(t.id);
    out.records.push_back(std::move(t));
  }
  out.stats = compute_stats(out.records);
  return out;
}

LoadedCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read corpus " + path.string());
  return parse_corpus(in);
}

void write_corpus(const std::filesystem::path& path, std::span<const LabeledText> records) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  write_jsonl(path, rows);
}

// ---------------------------------------------------------------------------

SplitResult split_train_test(std::span<const LabeledText> records, double test_fraction, std::uint64_t seed,
                             std::string_view stratify_by) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw PreconditionError("test_fraction must be in (0, 1)");

  std::vector<std::string> fields;
  std::stringstream ss{std::string(stratify_by)};
  for (std::string f; std::getline(ss, f, ',');) {
    f = to_lower_ascii(trim(f));
    if (f.empty()) continue;
    if (f != "label" && f != "domain" && f != "generator") throw PreconditionError("unknown stratify field '" + f + "'");
    fields.push_back(f);
  }

  auto key_of = [&](const LabeledText& t) {
    std::string key;
    for (const auto& f : fields) {
      if (f == "label") {
        key += to_string(t.label);
      } else if (f == "domain") {
        key += t.domain;
      } else {
        if (!t.generator) throw PreconditionError("record '" + t.id + "' has no generator to stratify by");
        key += *t.generator;
      }
      key += '\x1f';
    }
    return key;
  };

  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < records.size(); ++i) strata[key_of(records[i])].push_back(i);

  SplitResult out;
  std::vector<bool> to_test(records.size(), false);
  for (auto& [key, members] : strata) {
    const auto n = members.size();
    auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    k = std::min(k, n - 1);
    if (k == 0) {
      std::string name = key;
      std::replace(name.begin(), name.end(), '\x1f', '/');
      if (!name.empty()) name.pop_back();
      out.warnings.push_back("stratum '" + name + "' (" + std::to_string(n) +
                             " records) too small for a test share; kept in train");
      continue;
    }
    Rng rng(mix_seed(seed, key));
    auto order = members;
    rng.shuffle(order);
    for (std::size_t i = 0; i < k; ++i) to_test[order[i]] = true;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    LabeledText t = records[i];
    t.split = to_test[i] ? Split::Test : Split::Train;
    (to_test[i] ? out.test : out.train).push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::size_t whitespace_token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

std::vector<LengthBucket> make_length_buckets(std::span<const std::size_t> edges) {
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (edges[i] <= edges[i - 1]) throw PreconditionError("length bucket edges must be strictly ascending");
  }
  std::vector<LengthBucket> buckets;
  if (edges.empty()) {
    buckets.push_back({"all", 0, std::nullopt, {}});
    return buckets;
  }
  buckets.push_back({"<" + std::to_string(edges[0]), 0, edges[0], {}});
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    buckets.push_back(
        {"[" + std::to_string(edges[i]) + "," + std::to_string(edges[i + 1]) + ")", edges[i], edges[i + 1], {}});
  }
  buckets.push_back({">=" + std::to_string(edges.back()), edges.back(), std::nullopt, {}});
  return buckets;
}

std::size_t bucket_index(std::size_t tokens, std::span<const std::size_t> edges) {
  return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), tokens) - edges.begin());
}

std::vector<LengthBucket> bucket_by_length(std::span<const LabeledText> records, const TokenCounter& counter,
                                           std::span<const std::size_t> edges) {
  auto buckets = make_length_buckets(edges);
  for (std::size_t i = 0; i < records.size(); ++i) {
    buckets[bucket_index(counter(records[i].text), edges)].members.push_back(i);
  }
  return buckets;
}

// ---------------------------------------------------------------------------

std::string_view to_string(AttackKind k) {
  switch (k) {
    case AttackKind::Mixed:
      return "mixed";
    case AttackKind::Paraphrase:
      return "paraphrase";
    case AttackKind::Homoglyph:
      break;
  }
  return "homoglyph";
}

std::optional<AttackKind> parse_attack_kind(std::string_view s) {
  const auto k = to_lower_ascii(trim(s));
  if (k == "mixed") return AttackKind::Mixed;
  if (k == "paraphrase") return AttackKind::Paraphrase;
  if (k == "homoglyph" || k == "perturbation") return AttackKind::Homoglyph;
  return std::nullopt;
}

ConfusableMap ConfusableMap::parse(std::string_view tsv) {
  ConfusableMap m;
  std::stringstream ss{std::string(tsv)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(ss, line);) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ConfigError("confusables line " + std::to_string(line_no) + ": missing tab");
    const auto rest = line.substr(tab + 1);
    const auto from = utf8::decode(line.substr(0, tab));
    const auto to = utf8::decode(rest.substr(0, rest.find('\t')));
    if (from.size() != 1 || to.size() != 1 || !from[0].valid || !to[0].valid) {
      throw ConfigError("confusables line " + std::to_string(line_no) + ": expected one code point per column");
    }
    m.add(from[0].cp, to[0].cp);
  }
  return m;
}

ConfusableMap ConfusableMap::load(const std::filesystem::path& path) { return parse(read_text(path)); }

const ConfusableMap& ConfusableMap::builtin() {
  static const ConfusableMap m = parse(assets::confusables_v1);
  return m;
}

const char32_t* ConfusableMap::find(char32_t cp) const {
  auto it = map_.find(cp);
  return it == map_.end() ? nullptr : &it->second;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t i = 0;
  auto is_ws = [](char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; };
  while (i < text.size()) {
    const char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i;
      while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
      if (j == text.size() || is_ws(text[j])) {
        auto s = trim(text.substr(start, j - start));
        if (!s.empty()) out.push_back(std::move(s));
        while (j < text.size() && is_ws(text[j])) ++j;
        start = j;
      }
      i = j;
    } else {
      ++i;
    }
  }
  auto tail = trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.push_back(std::move(tail));
  return out;
}

namespace {

std::size_t substitution_count(double rate, std::size_t eligible) {
  const double x = rate * static_cast<double>(eligible);
  const double r = std::round(x);
  if (std::fabs(x - r) < 1e-9) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(x));
}

std::string format_params(const std::string& kind, std::initializer_list<std::pair<const char*, std::string>> kv) {
  std::string out = kind + "(";
  bool first = true;
  for (const auto& [k, v] : kv) {
    if (!first) out += ",";
    out += k;
    out += "=";
    out += v;
    first = false;
  }
  return out + ")";
}

std::string fmt_real(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

LabeledText homoglyph(const LabeledText& in, const AttackSpec& spec, const ConfusableMap& map) {
  if (!(spec.substitution_rate >= 0.0 && spec.substitution_rate <= 1.0)) {
    throw PreconditionError("substitution_rate must be in [0, 1]");
  }
  const auto spans = utf8::decode(in.text);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (spans[i].valid && map.find(spans[i].cp) != nullptr) eligible.push_back(i);
  }
  const std::size_t k = substitution_count(spec.substitution_rate, eligible.size());
  Rng rng(mix_seed(spec.seed, in.id));
  // partial Fisher-Yates: the first k entries become the sample
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.bounded(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
  }
  std::vector<bool> replace(spans.size(), false);
  for (std::size_t i = 0; i < k; ++i) replace[eligible[i]] = true;

  LabeledText out = in;
  out.text.clear();
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (replace[i]) {
      utf8::append(out.text, *map.find(spans[i].cp));
    } else {
      out.text.append(in.text, spans[i].offset, spans[i].length);
    }
  }
  out.attack = format_params("homoglyph", {{"rate", fmt_real(spec.substitution_rate)},
                                           {"seed", std::to_string(spec.seed)},
                                           {"replaced", std::to_string(k)}});
  return out;
}

LabeledText mixed(const LabeledText& in, const AttackSpec& spec, std::span<const std::string> pool) {
  if (!(spec.mix_ratio >= 0.0 && spec.mix_ratio < 1.0)) {
    throw ConfigError("mix_ratio must be in [0, 1) for the mixed attack");
  }
  const auto ai = split_sentences(in.text);
  const auto n_ai = ai.size();
  const auto n_human = static_cast<std::size_t>(
      std::llround(static_cast<double>(n_ai) * spec.mix_ratio / (1.0 - spec.mix_ratio)));
  LabeledText out = in;
  out.attack = format_params("mixed", {{"ratio", fmt_real(spec.mix_ratio)},
                                       {"seed", std::to_string(spec.seed)},
                                       {"human_sentences", std::to_string(n_human)}});
  if (n_human == 0) return out;

  std::vector<std::vector<std::string>> human;
  for (const auto& t : pool) {
    auto s = split_sentences(t);
    if (!s.empty()) human.push_back(std::move(s));
  }
  if (human.empty()) throw ConfigError("mixed attack requires a non-empty human companion pool");

  Rng rng(mix_seed(spec.seed, in.id));
  std::size_t doc = static_cast<std::size_t>(rng.bounded(human.size()));
  std::size_t sent = 0;
  std::vector<std::string> picked;
  while (picked.size() < n_human) {
    picked.push_back(human[doc][sent]);
    if (++sent == human[doc].size()) {
      sent = 0;
      doc = (doc + 1) % human.size();
    }
  }

  // Spread human sentences evenly: slot i is human when floor((i+1)h/L) > floor(ih/L).
  const std::size_t total = n_ai + n_human;
  std::string text;
  std::size_t ai_i = 0;
  std::size_t hu_i = 0;
  for (std::size_t i = 0; i < total; ++i) {
    const bool human_slot = ((i + 1) * n_human) / total > (i * n_human) / total;
    const std::string& s = human_slot ? picked[hu_i++] : ai[ai_i++];
    if (!text.empty()) text += ' ';
    text += s;
  }
  out.text = std::move(text);
  return out;
}

}  // namespace

LabeledText apply_attack(const LabeledText& instance, const AttackSpec& spec, const AttackContext& ctx) {
  switch (spec.kind) {
    case AttackKind::Homoglyph:
      return homoglyph(instance, spec, ctx.confusables ? *ctx.confusables : ConfusableMap::builtin());
    case AttackKind::Mixed:
      return mixed(instance, spec, ctx.human_pool);
    case AttackKind::Paraphrase: {
      if (!ctx.rewriter) throw ConfigError("paraphrase attack requires a rewriter (round-trip translation endpoint)");
      LabeledText out = instance;
      out.text = ctx.rewriter(instance.text);
      if (trim(out.text).empty()) throw ProtocolError("paraphrase rewriter returned empty text for '" + instance.id + "'");
      out.attack = "paraphrase(seed=" + std::to_string(spec.seed) + ")";
      return out;
    }
  }
  throw PreconditionError("unknown attack kind");
}

}  // namespace aigt::corpus
