#include "aigt/cli.hpp"

#include <CLI11.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <sstream>

#include "aigt/config.hpp"
#include "aigt/corpus.hpp"
#include "aigt/diagnostics.hpp"
#include "aigt/digest.hpp"
#include "aigt/evalharness.hpp"
#include "aigt/filterkit.hpp"
#include "aigt/manifest.hpp"
#include "aigt/rng.hpp"
#include "aigt/scorers.hpp"
#include "aigt/teacher.hpp"
#include "aigt/trainmath.hpp"
#include "aigt/verdictor.hpp"

namespace fs = std::filesystem;

namespace aigt::cli {

namespace {

struct Globals {
  std::string config;
  std::map<std::string, std::string> urls;
  std::map<std::string, std::string> models;
  std::string cache_dir;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> top_k;
  bool verbose = false;
};

/// Exit code 2 without an exception: outputs were written but some endpoint
/// calls never succeeded.
constexpr int kIncomplete = 2;

class Ctx {
 public:
  Ctx(RunConfig cfg, std::ostream& out) : cfg(std::move(cfg)), out(out) {}

  lm::Client& client() {
    if (!client_) {
      lm::ClientOptions o;
      o.transport = lm::make_http_transport();
      o.cache = std::make_shared<lm::ResponseCache>(cfg.cache_dir);
      client_ = std::make_unique<lm::Client>(o);
    }
    return *client_;
  }

  void log_counters() const {
    if (!client_) return;
    const auto c = client_->counters();
    spdlog::info("endpoint calls: {} network, {} cached, {} retries", c.network_calls, c.cache_hits, c.retries);
  }

  RunConfig cfg;
  std::ostream& out;

 private:
  std::unique_ptr<lm::Client> client_;
};

// ---------------------------------------------------------------------------
// Run directories

struct Input {
  std::string role;
  fs::path path;
};

/// Manifest config: the endpoints this subcommand uses plus the shared knobs.
json scoped_config(const RunConfig& cfg, std::initializer_list<std::string_view> roles) {
  json j = cfg.public_json();
  json eps = json::object();
  for (auto r : roles) {
    const auto& e = cfg.endpoints.at(std::string(r));
    if (e.configured()) eps[std::string(r)] = e.public_json();
  }
  j["endpoints"] = std::move(eps);
  return j;
}

RunDir open_run(const Ctx& c, std::string subcommand, json config, json parameters, const std::vector<Input>& inputs) {
  RunManifest m;
  m.subcommand = std::move(subcommand);
  m.config = std::move(config);
  m.parameters = std::move(parameters);
  m.seed = c.cfg.seed;
  for (const auto& in : inputs) {
    if (!fs::is_regular_file(in.path)) throw ConfigError(in.role + " input not found: " + in.path.string());
    m.inputs.push_back({in.role, in.path, sha256_file(in.path)});
  }
  return RunDir(c.cfg.out_dir, std::move(m));
}

void finish(Ctx& c, RunDir& run) {
  run.finish();
  c.log_counters();
  c.out << run.path().string() << "\n";
}

// ---------------------------------------------------------------------------
// Input helpers

std::vector<corpus::LabeledText> load_records(const fs::path& path) {
  auto loaded = corpus::load_corpus(path);
  if (!loaded.rejections.empty()) {
    const auto& r = loaded.rejections.front();
    throw ConfigError(path.string() + ":" + std::to_string(r.line) + ": " + r.reason + " (" +
                      std::to_string(loaded.rejections.size()) + " invalid records; run ingest first)");
  }
  if (loaded.records.empty()) throw ConfigError(path.string() + " holds no records");
  return std::move(loaded.records);
}

std::vector<json> records_json(std::span<const corpus::LabeledText> records) {
  std::vector<json> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(corpus::to_json(r));
  return out;
}

teacher::TemplateKind template_kind(const std::string& name) {
  auto k = teacher::parse_template_kind(name);
  if (!k) throw ConfigError("unknown prompt '" + name + "' (balanced, concise, rubric, oneshot, noncot)");
  return *k;
}

teacher::PromptTemplate load_template(const std::string& name, const std::string& file) {
  const auto kind = template_kind(name);
  if (file.empty()) return teacher::PromptTemplate::builtin(kind);
  return teacher::PromptTemplate::custom(kind, read_text(file));
}

Authorship gold_of(const json& j, const std::string& field) {
  auto g = parse_authorship(j.value(field, ""));
  if (!g) throw ConfigError("record lacks a valid '" + field + "' label: " + j.dump());
  return *g;
}

void rethrow_first(const std::vector<std::exception_ptr>& errors) {
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string tau_text(double tau) {
  if (std::isinf(tau)) return tau > 0 ? "+inf" : "-inf";
  return fmt::format("{:.6g}", tau);
}

using Matrix = std::map<std::string, std::vector<eval::ScoredInstance>>;

/// scores.jsonl -> one instance list per scorer, in file order.
Matrix load_scores(const fs::path& path) {
  Matrix m;
  std::size_t n = 0;
  for (const auto& j : read_jsonl_strict(path)) {
    ++n;
    eval::ScoredInstance s;
    s.id = j.at("id").get<std::string>();
    s.domain = j.at("domain").get<std::string>();
    s.gold = gold_of(j, "gold");
    if (!j.at("value").is_number()) throw ConfigError("score for '" + s.id + "' is not a number");
    s.score = j.at("value").get<double>();
    s.tokens = j.value("tokens", std::size_t{0});
    m[j.at("scorer").get<std::string>()].push_back(std::move(s));
  }
  if (n == 0) throw ConfigError(path.string() + " holds no scores");
  return m;
}

// ---------------------------------------------------------------------------
// ingest / split

struct IngestArgs {
  std::string input;
};

int cmd_ingest(Ctx& c, const IngestArgs& a) {
  auto loaded = corpus::load_corpus(a.input);
  for (const auto& r : loaded.rejections) spdlog::warn("{}:{}: {}", a.input, r.line, r.reason);
  for (const auto& w : loaded.warnings) spdlog::warn("{}", w);
  if (loaded.records.empty()) throw ConfigError(a.input + " holds no valid records");

  auto run = open_run(c, "ingest", scoped_config(c.cfg, {}), json::object(), {{"corpus", a.input}});
  run.write_jsonl("corpus.jsonl", records_json(loaded.records));
  json rejections = json::array();
  for (const auto& r : loaded.rejections) rejections.push_back({{"line", r.line}, {"reason", r.reason}});
  run.write_json("stats.json", {{"stats", corpus::to_json(loaded.stats)},
                                {"accepted", loaded.records.size()},
                                {"rejected", std::move(rejections)},
                                {"warnings", loaded.warnings}});
  finish(c, run);
  return 0;
}

struct SplitArgs {
  std::string input;
  double test_fraction = 0.2;
  std::string stratify = "label,domain";
};

int cmd_split(Ctx& c, const SplitArgs& a) {
  const auto records = load_records(a.input);
  auto res = corpus::split_train_test(records, a.test_fraction, c.cfg.seed, a.stratify);
  for (const auto& w : res.warnings) spdlog::warn("{}", w);

  auto run = open_run(c, "split", scoped_config(c.cfg, {}),
                      {{"test_fraction", a.test_fraction}, {"stratify", a.stratify}}, {{"corpus", a.input}});
  run.write_jsonl("train.jsonl", records_json(res.train));
  run.write_jsonl("test.jsonl", records_json(res.test));
  run.write_json("split.json", {{"train", corpus::to_json(corpus::compute_stats(res.train))},
                                {"test", corpus::to_json(corpus::compute_stats(res.test))},
                                {"warnings", res.warnings}});
  finish(c, run);
  return 0;
}

// ---------------------------------------------------------------------------
// teach / filter

struct TeachArgs {
  std::string input;
  std::string prompt = "balanced";
  std::string template_file;
  bool judge = false;
};

int cmd_teach(Ctx& c, const TeachArgs& a) {
  const auto chat = c.cfg.endpoint("chat");
  if (a.judge) c.cfg.endpoint("judge");
  const auto tmpl = load_template(a.prompt, a.template_file);
  const auto records = load_records(a.input);

  auto run = open_run(c, "teach", scoped_config(c.cfg, {"chat", "judge"}),
                      {{"prompt", a.prompt}, {"template_sha256", sha256_hex(tmpl.body)}, {"judge", a.judge}},
                      {{"corpus", a.input}});

  teacher::Teacher t(c.client(), chat, c.cfg.teacher_temperature);
  const auto audits = t.generate_batch(tmpl, records);
  std::vector<json> lines;
  std::size_t unscored = 0;
  for (const auto& r : audits) {
    lines.push_back(teacher::to_json(r));
    if (!r.scored()) {
      ++unscored;
      spdlog::warn("{}: unscored: {}", r.id, r.error);
    }
  }
  run.write_jsonl("completions.jsonl", lines);

  json summary{{"prompt", a.prompt}, {"instances", audits.size()}, {"scored", audits.size() - unscored},
               {"unscored", unscored}};

  if (a.judge) {
    const auto& judge = c.cfg.endpoint("judge");
    std::map<std::string, const corpus::LabeledText*> by_id;
    for (const auto& r : records) by_id[r.id] = &r;
    std::vector<json> verdicts(audits.size());
    auto errors = lm::run_bounded(audits.size(), judge.max_parallel, [&](std::size_t i) {
      const auto& r = audits[i];
      json j{{"id", r.id}};
      if (!r.scored()) {
        j["status"] = "skipped";
        j["reason"] = "unscored";
      } else if (auto p = teacher::parse_strict(*r.completion, r.kind);
                 !std::holds_alternative<teacher::ParsedRationale>(p) ||
                 std::get<teacher::ParsedRationale>(p).rationale.empty()) {
        j["status"] = "skipped";
        j["reason"] = "no rationale";
      } else {
        try {
          const auto s = teacher::judge_rationale(c.client(), judge, std::get<teacher::ParsedRationale>(p).rationale,
                                                  by_id.at(r.id)->text);
          j["status"] = "ok";
          j["specificity"] = s.specificity;
          j["grounding"] = s.grounding;
          j["coherence"] = s.coherence;
        } catch (const teacher::JudgeFailure& e) {
          j["status"] = "failed";
          j["reason"] = e.what();
        }
      }
      verdicts[i] = std::move(j);
    });
    std::size_t judge_unscored = 0;
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (!errors[i]) continue;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const NetworkError& e) {
        verdicts[i] = {{"id", audits[i].id}, {"status", "unscored"}, {"reason", e.what()}};
        ++judge_unscored;
      }
    }
    run.write_jsonl("judge.jsonl", verdicts);
    summary["judge_unscored"] = judge_unscored;
    unscored += judge_unscored;
  }

  run.write_json("teach.json", summary);
  finish(c, run);
  return unscored > 0 ? kIncomplete : 0;
}

struct FilterArgs {
  std::string texts;
  std::string completions;
  std::string pool;
};

int cmd_filter(Ctx& c, const FilterArgs& a) {
  const auto texts = load_records(a.texts);
  std::map<std::string, teacher::AuditRecord> audits;
  for (const auto& j : read_jsonl_strict(a.completions)) {
    auto r = teacher::audit_from_json(j);
    const auto id = r.id;
    if (!audits.emplace(id, std::move(r)).second) throw ConfigError("completion for '" + id + "' repeats");
  }
  std::vector<corpus::LabeledText> pool;
  std::vector<Input> inputs{{"texts", a.texts}, {"completions", a.completions}};
  if (!a.pool.empty()) {
    pool = load_records(a.pool);
    inputs.push_back({"pool", a.pool});
  }

  std::vector<filterkit::FilterOutcome> outcomes;
  for (const auto& t : texts) {
    auto it = audits.find(t.id);
    if (it == audits.end()) throw ConfigError("no completion for '" + t.id + "'");
    if (!it->second.scored()) {
      throw ConfigError("completion for '" + t.id + "' is unscored (" + it->second.error + "); re-run teach");
    }
    outcomes.push_back(filterkit::categorize(t, teacher::parse_strict(*it->second.completion, it->second.kind)));
  }
  if (audits.size() != texts.size()) throw ConfigError("completions reference ids missing from the texts");

  const auto ds = filterkit::build_datasets(outcomes, pool);

  auto run = open_run(c, "filter", scoped_config(c.cfg, {}), json::object(), inputs);
  std::vector<json> sft, grpo, outs;
  for (const auto& e : ds.sft) sft.push_back(corpus::to_json(filterkit::to_record(e)));
  for (const auto& e : ds.grpo) {
    auto j = corpus::to_json(filterkit::to_record(e));
    j["origin"] = std::string(filterkit::to_string(e.origin));
    grpo.push_back(std::move(j));
  }
  for (const auto& o : outcomes) {
    json j{{"id", o.instance.id}, {"category", std::string(filterkit::to_string(o.category))}};
    if (o.parsed) j["predicted"] = std::string(to_string(o.parsed->verdict));
    if (o.failure) {
      j["failure"] = std::string(teacher::to_string(o.failure->kind));
      j["detail"] = o.failure->detail;
    }
    outs.push_back(std::move(j));
  }
  run.write_jsonl("sft.jsonl", sft);
  run.write_jsonl("grpo.jsonl", grpo);
  run.write_jsonl("outcomes.jsonl", outs);
  run.write_json("filter_report.json", filterkit::to_json(ds.report));
  c.out << "RETAINED " << ds.report.retained << " WRONG_PREDICTION " << ds.report.wrong_prediction << " PARSE_ERROR "
        << ds.report.parse_error << "\n";
  finish(c, run);
  return 0;
}

// ---------------------------------------------------------------------------
// score

struct ScoreArgs {
  std::string input;
  std::vector<std::string> scorers{"likelihood"};
  std::size_t perturbations = 10;
  std::size_t regenerations = 5;
  double prefix_fraction = 0.5;
  std::size_t ngram = 4;
  std::string exec = "parallel";
};

std::vector<lm::ScoredText> fetch_scored(lm::Client& client, const lm::EndpointConfig& ep,
                                         const std::vector<std::string>& texts, int top_k) {
  std::vector<lm::ScoredText> out(texts.size());
  rethrow_first(lm::run_bounded(texts.size(), ep.max_parallel,
                                [&](std::size_t i) { out[i] = client.score_tokens(ep, "", texts[i], top_k); }));
  return out;
}

int cmd_score(Ctx& c, const ScoreArgs& a) {
  std::vector<scorers::ScorerKind> kinds;
  for (const auto& s : a.scorers) {
    auto k = scorers::parse_scorer_kind(s);
    if (!k) throw ConfigError("unknown scorer '" + s + "'");
    if (std::find(kinds.begin(), kinds.end(), *k) == kinds.end()) kinds.push_back(*k);
  }
  if (kinds.empty()) throw ConfigError("--scorer needs at least one scorer");
  if (a.exec != "serial" && a.exec != "parallel") throw ConfigError("--exec must be serial or parallel");
  const Exec exec = a.exec == "serial" ? Exec::Serial : Exec::Parallel;

  auto uses = [&](std::initializer_list<scorers::ScorerKind> ks) {
    return std::any_of(kinds.begin(), kinds.end(),
                       [&](auto k) { return std::find(ks.begin(), ks.end(), k) != ks.end(); });
  };
  using K = scorers::ScorerKind;
  const bool need_observer = uses({K::Likelihood, K::Entropy, K::LogRank, K::Lrr, K::FastDetectGpt, K::DetectGpt,
                                   K::Npr, K::Binoculars});
  const bool need_variants = uses({K::DetectGpt, K::Npr});
  const bool need_performer = uses({K::Binoculars});
  const bool need_chat = need_variants || uses({K::DnaGpt});

  // Validate every endpoint before the first call.
  const lm::EndpointConfig* score_ep = need_observer ? &c.cfg.endpoint("score") : nullptr;
  const lm::EndpointConfig* performer_ep = need_performer ? &c.cfg.endpoint("performer") : nullptr;
  const lm::EndpointConfig* chat_ep = need_chat ? &c.cfg.endpoint("chat") : nullptr;
  if (need_variants && a.perturbations < 2) throw ConfigError("--perturbations must be >= 2");
  if (uses({K::DnaGpt}) && (a.regenerations < 1 || a.ngram < 1)) {
    throw ConfigError("--regenerations and --ngram must be >= 1");
  }
  if (!(a.prefix_fraction > 0.0 && a.prefix_fraction < 1.0)) throw ConfigError("--prefix-fraction must be in (0, 1)");

  const auto records = load_records(a.input);
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.text);

  json params{{"scorers", json::array()}};
  for (auto k : kinds) params["scorers"].push_back(std::string(scorers::to_string(k)));
  if (need_variants) params["perturbations"] = a.perturbations;
  if (uses({K::DnaGpt})) {
    params["regenerations"] = a.regenerations;
    params["prefix_fraction"] = a.prefix_fraction;
    params["ngram"] = a.ngram;
  }
  auto run = open_run(c, "score", scoped_config(c.cfg, {"score", "performer", "chat"}), params, {{"corpus", a.input}});

  auto& client = c.client();
  const int top_k = c.cfg.top_k;
  std::vector<lm::ScoredText> observer;
  if (need_observer) observer = fetch_scored(client, *score_ep, texts, top_k);

  std::vector<std::vector<lm::ScoredText>> variants;
  if (need_variants) {
    variants.resize(records.size());
    const auto rewriter = scorers::make_span_rewriter(client, *chat_ep);
    rethrow_first(lm::run_bounded(records.size(), chat_ep->max_parallel, [&](std::size_t i) {
      const auto set = scorers::perturb(texts[i], a.perturbations, rewriter, mix_seed(c.cfg.seed, records[i].id),
                                        "span-fill");
      for (const auto& v : set.variants) variants[i].push_back(client.score_tokens(*score_ep, "", v, top_k));
    }));
  }

  std::vector<json> lines;
  json counts = json::object();
  for (auto k : kinds) {
    std::vector<double> raw(records.size());
    switch (k) {
      case K::DetectGpt:
      case K::Npr:
        for (std::size_t i = 0; i < records.size(); ++i) {
          raw[i] = k == K::DetectGpt ? scorers::detectgpt(observer[i], variants[i]) : scorers::npr(observer[i], variants[i]);
        }
        break;
      case K::Binoculars: {
        const auto performer = fetch_scored(client, *performer_ep, texts, top_k);
        for (std::size_t i = 0; i < records.size(); ++i) {
          raw[i] = scorers::binoculars(observer[i], scorers::cross_perplexity_text(observer[i], performer[i]));
        }
        break;
      }
      case K::DnaGpt:
        rethrow_first(lm::run_bounded(records.size(), chat_ep->max_parallel, [&](std::size_t i) {
          const auto split = scorers::dna_split(texts[i], a.prefix_fraction);
          const auto regens = scorers::regenerate_continuations(client, *chat_ep, split.prefix, split.continuation.size(),
                                                                a.regenerations, mix_seed(c.cfg.seed, records[i].id));
          raw[i] = scorers::dnagpt(texts[i], a.prefix_fraction, a.ngram, regens);
        }));
        break;
      default:
        raw = scorers::score_batch(k, observer, exec);
        break;
    }
    const std::string name(scorers::to_string(k));
    json identity{{"scorer", name}, {"top_k", top_k}};
    if (score_ep && k != K::DnaGpt) identity["score"] = score_ep->public_json();
    if (k == K::Binoculars) identity["performer"] = performer_ep->public_json();
    if (k == K::DetectGpt || k == K::Npr) {
      identity["chat"] = chat_ep->public_json();
      identity["perturbations"] = a.perturbations;
    }
    if (k == K::DnaGpt) {
      identity = {{"scorer", name},
                  {"chat", chat_ep->public_json()},
                  {"regenerations", a.regenerations},
                  {"prefix_fraction", a.prefix_fraction},
                  {"ngram", a.ngram}};
    }
    const auto config_digest = sha256_hex(identity.dump()).substr(0, 16);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto s = scorers::oriented(k, records[i].id, raw[i]);
      lines.push_back({{"scorer", name},
                       {"id", s.id},
                       {"domain", records[i].domain},
                       {"gold", std::string(to_string(records[i].label))},
                       {"tokens", corpus::whitespace_token_count(records[i].text)},
                       {"raw", s.raw},
                       {"value", s.value},
                       {"config_digest", config_digest}});
    }
    counts[name] = records.size();
  }
  run.write_jsonl("scores.jsonl", lines);
  run.write_json("score.json", {{"instances", records.size()}, {"scores", counts}});
  finish(c, run);
  return 0;
}

// ---------------------------------------------------------------------------
// detect

struct DetectArgs {
  std::string input;
  std::string prompt = "balanced";
  std::string template_file;
};

int cmd_detect(Ctx& c, const DetectArgs& a) {
  const auto chat = c.cfg.endpoint("chat");
  const auto tmpl = load_template(a.prompt, a.template_file);
  const auto records = load_records(a.input);
  auto run = open_run(c, "detect", scoped_config(c.cfg, {"chat"}),
                      {{"prompt", a.prompt},
                       {"mode", std::string(verdictor::to_string(verdictor::mode_of(tmpl.kind)))},
                       {"template_sha256", sha256_hex(tmpl.body)}},
                      {{"corpus", a.input}});
  const auto verdicts = verdictor::detect_batch(c.client(), chat, records, tmpl);
  std::vector<json> lines;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    auto j = verdictor::to_json(verdicts[i]);
    j["gold"] = std::string(to_string(records[i].label));
    lines.push_back(std::move(j));
  }
  const auto stats = verdictor::batch_stats(verdicts, records);
  run.write_jsonl("verdicts.jsonl", lines);
  run.write_json("stats.json", verdictor::to_json(stats));
  finish(c, run);
  if (stats.transport_failed > 0) {
    spdlog::error("{} instances failed after retries; re-run to resume", stats.transport_failed);
    return kIncomplete;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// tune / eval / report

struct TuneArgs {
  std::string scores;
  std::string scope = "global";
  bool pin_direction = false;
};

int cmd_tune(Ctx& c, const TuneArgs& a) {
  const auto scope = eval::parse_scope(a.scope);
  if (!scope) throw ConfigError("--scope must be global or per-domain");
  const auto matrix = load_scores(a.scores);
  auto run = open_run(c, "tune", scoped_config(c.cfg, {}),
                      {{"scope", std::string(eval::to_string(*scope))}, {"pin_direction", a.pin_direction}},
                      {{"scores", a.scores}});
  const auto configs = eval::tune_all(matrix, *scope, a.pin_direction);

  json all = json::object();
  std::string md = "# Oracle thresholds (" + std::string(eval::to_string(*scope)) + ")\n\n";
  md += "| scorer | domain | rule | tau | accuracy |\n|---|---|---|---|---|\n";
  for (const auto& [name, cfg] : configs) {
    all[name] = eval::to_json(cfg);
    for (const auto& [domain, rule] : cfg.thresholds) {
      const auto& fit = cfg.fits.at(domain);
      md += "| " + name + " | " + (domain == eval::kGlobalKey ? std::string("all") : domain) + " | " +
            std::string(eval::to_string(rule.direction)) + " | " + tau_text(rule.tau) + " | " +
            fit.accuracy().fixed(4) + " (" + std::to_string(fit.correct) + "/" + std::to_string(fit.total) + ") |\n";
    }
  }
  run.write_json("thresholds.json", {{"scorers", all}});
  run.write_markdown("tune.md", md);
  finish(c, run);
  return 0;
}

struct EvalArgs {
  std::string scores;
  std::string thresholds;
};

std::string confusion_csv_row(const std::string& scorer, const std::string& key, const eval::Confusion& m) {
  return scorer + "," + key + "," + std::to_string(m.tp) + "," + std::to_string(m.fp) + "," + std::to_string(m.tn) +
         "," + std::to_string(m.fn) + "," + m.accuracy().fixed(4) + "," + m.fpr().fixed(4) + "," + m.tpr().fixed(4) +
         "\n";
}

int cmd_eval(Ctx& c, const EvalArgs& a) {
  const auto matrix = load_scores(a.scores);
  const auto tj = read_json(a.thresholds);
  if (!tj.contains("scorers") || !tj.at("scorers").is_object()) throw ConfigError(a.thresholds + " has no scorers map");

  auto run = open_run(c, "eval", scoped_config(c.cfg, {}), json::object(),
                      {{"scores", a.scores}, {"thresholds", a.thresholds}});
  json reports = json::object();
  std::string per_domain = "scorer,domain,tp,fp,tn,fn,accuracy,fpr,tpr\n";
  std::string per_bucket = "scorer,bucket,tp,fp,tn,fn,accuracy,fpr,tpr\n";
  std::string md = "# Evaluation\n\n| scorer | accuracy | FPR | TPR |\n|---|---|---|---|\n";
  for (const auto& [name, cj] : tj.at("scorers").items()) {
    auto it = matrix.find(name);
    if (it == matrix.end()) throw ConfigError("no scores for tuned scorer '" + name + "'");
    const auto cfg = eval::threshold_config_from_json(cj);
    auto report = eval::evaluate(it->second, cfg, c.cfg.length_edges);
    report.provenance = {{"scope", std::string(eval::to_string(cfg.scope))}, {"thresholds_sha256", sha256_file(a.thresholds)}};
    for (const auto& [d, m] : report.per_domain) per_domain += confusion_csv_row(name, d, m);
    for (const auto& b : report.per_bucket) per_bucket += confusion_csv_row(name, b.label, b.confusion);
    md += "| " + name + " | " + report.overall.accuracy().fixed(3) + " | " + report.overall.fpr().fixed(3) + " | " +
          report.overall.tpr().fixed(3) + " |\n";
    reports[name] = eval::to_json(report);
  }
  if (reports.empty()) throw ConfigError(a.thresholds + " lists no scorers");
  run.write_json("eval.json", {{"scorers", reports}});
  run.write_text("per_domain.csv", per_domain);
  run.write_text("per_bucket.csv", per_bucket);
  run.write_markdown("eval.md", md);
  finish(c, run);
  return 0;
}

struct ReportArgs {
  std::vector<std::string> evals;
};

int cmd_report(Ctx& c, const ReportArgs& a) {
  std::vector<std::pair<std::string, eval::EvalReport>> rows;
  std::vector<Input> inputs;
  for (std::size_t n = 0; n < a.evals.size(); ++n) {
    std::string name;
    fs::path path = a.evals[n];
    if (auto eq = a.evals[n].find('='); eq != std::string::npos) {
      name = a.evals[n].substr(0, eq);
      path = a.evals[n].substr(eq + 1);
    }
    if (fs::is_directory(path)) path /= "eval.json";
    inputs.push_back({"eval" + std::to_string(n), path});
    const auto j = read_json(path);
    if (!j.contains("scorers")) throw ConfigError(path.string() + " is not an eval.json");
    const auto& scorers = j.at("scorers");
    for (const auto& [scorer, r] : scorers.items()) {
      std::string label = scorer;
      if (!name.empty()) label = scorers.size() == 1 ? name : name + "/" + scorer;
      rows.emplace_back(label, eval::eval_report_from_json(r));
    }
  }
  if (rows.empty()) throw ConfigError("report needs at least one --eval");
  auto run = open_run(c, "report", scoped_config(c.cfg, {}), {{"evals", a.evals.size()}}, inputs);
  const auto table = eval::compare_reports(rows);
  run.write_markdown("comparison.md", table.markdown());
  run.write_text("comparison.csv", table.csv());
  finish(c, run);
  return 0;
}

// ---------------------------------------------------------------------------
// trainmath-export

struct TrainArgs {
  std::string groups;
  std::string sft;
  std::string prompt = "balanced";
  std::optional<double> correct, incorrect, unparseable;
};

std::vector<double> logprob_list(const json& j, const char* field, const std::string& id) {
  if (!j.contains(field) || !j.at(field).is_array()) throw ConfigError("'" + id + "' lacks the " + field + " array");
  std::vector<double> v;
  for (const auto& x : j.at(field)) {
    if (!x.is_number()) throw ConfigError("'" + id + "': " + field + " holds a non-number");
    v.push_back(x.get<double>());
  }
  return v;
}

int cmd_trainmath(Ctx& c, const TrainArgs& a) {
  if (a.groups.empty() && a.sft.empty()) throw ConfigError("trainmath-export needs --groups and/or --sft");
  auto spec = c.cfg.reward;
  if (a.correct) spec.correct = *a.correct;
  if (a.incorrect) spec.incorrect = *a.incorrect;
  if (a.unparseable) spec.unparseable = *a.unparseable;
  spec.validate();
  const auto kind = template_kind(a.prompt);

  std::vector<Input> inputs;
  if (!a.groups.empty()) inputs.push_back({"groups", a.groups});
  if (!a.sft.empty()) inputs.push_back({"sft", a.sft});
  auto cfg = scoped_config(c.cfg, {});
  cfg["reward"] = spec.to_json();
  auto run = open_run(c, "trainmath-export", cfg, {{"prompt", a.prompt}}, inputs);

  json summary{{"reward", spec.to_json()}};
  if (!a.groups.empty()) {
    std::vector<trainmath::RolloutGroup> groups;
    for (const auto& j : read_jsonl_strict(a.groups)) {
      const auto id = j.at("prompt_id").get<std::string>();
      const auto completions = j.at("completions").get<std::vector<std::string>>();
      groups.push_back(trainmath::make_group(id, gold_of(j, "gold"), completions, kind, spec));
    }
    std::vector<json> lines;
    for (const auto& r : trainmath::export_advantages(groups)) lines.push_back(trainmath::to_json(r));
    run.write_jsonl("advantages.jsonl", lines);
    summary["groups"] = groups.size();
    summary["completions"] = lines.size();
  }
  if (!a.sft.empty()) {
    std::vector<json> lines;
    for (const auto& j : read_jsonl_strict(a.sft)) {
      const auto id = j.at("id").get<std::string>();
      const auto loss =
          trainmath::sft_loss(logprob_list(j, "rationale_logprobs", id), logprob_list(j, "label_logprobs", id));
      lines.push_back({{"id", id}, {"rationale_nll", loss.rationale_nll}, {"label_nll", loss.label_nll}, {"total", loss.total}});
    }
    run.write_jsonl("sft_losses.jsonl", lines);
    summary["sft_examples"] = lines.size();
  }
  run.write_json("trainmath.json", summary);
  finish(c, run);
  return 0;
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
  std::string verdicts;
  std::string corpus;
  std::string prompt = "balanced";
  bool no_probe = false;
  double test_fraction = 0.2;
  double l2 = 1e-2;
};

int cmd_diagnose(Ctx& c, const DiagnoseArgs& a) {
  const auto kind = template_kind(a.prompt);
  if (!teacher::demands_rationale(kind)) throw ConfigError("diagnose needs verdicts from a rationale-bearing prompt");
  const auto records = load_records(a.corpus);
  std::map<std::string, const corpus::LabeledText*> gold;
  for (const auto& r : records) gold[r.id] = &r;

  std::vector<verdictor::DetectionVerdict> verdicts;
  for (const auto& j : read_jsonl_strict(a.verdicts)) {
    auto v = verdictor::verdict_from_json(j, kind);
    if (!gold.count(v.id)) throw ConfigError("verdict '" + v.id + "' has no corpus record");
    if (v.kind == verdictor::OutcomeKind::Verdict) verdicts.push_back(std::move(v));
  }
  if (verdicts.empty()) throw ConfigError(a.verdicts + " holds no parsed verdicts");

  const bool probe = !a.no_probe && c.cfg.endpoints.at("embed").configured();
  json params{{"prompt", a.prompt}, {"probe", probe}};
  if (probe) {
    params["test_fraction"] = a.test_fraction;
    params["l2"] = a.l2;
  }
  auto run = open_run(c, "diagnose", scoped_config(c.cfg, probe ? std::initializer_list<std::string_view>{"embed"}
                                                              : std::initializer_list<std::string_view>{}),
                      params, {{"verdicts", a.verdicts}, {"corpus", a.corpus}});

  std::vector<diagnostics::ConsistencyRecord> cons;
  std::vector<json> cons_lines;
  for (const auto& v : verdicts) {
    diagnostics::ConsistencyRecord r{v.id, diagnostics::extract_rationale_label(v.parsed->rationale), v.parsed->verdict};
    json j{{"id", r.id}, {"verdict", std::string(to_string(r.verdict))}};
    j["rationale_label"] = r.rationale_label ? json(std::string(to_string(*r.rationale_label))) : json(nullptr);
    j["match"] = r.match() ? json(*r.match()) : json(nullptr);
    cons_lines.push_back(std::move(j));
    cons.push_back(std::move(r));
  }
  const auto summary = diagnostics::consistency_rate(cons);
  run.write_jsonl("consistency.jsonl", cons_lines);
  run.write_text("consistency.csv", diagnostics::consistency_csv(summary));
  json report{{"consistency", {{"match_rate", rate_json(summary.match_rate)}, {"absent", summary.absent}, {"total", summary.total}}}};

  if (probe) {
    const auto& embed = c.cfg.endpoint("embed");
    auto& client = c.client();
    std::vector<diagnostics::ProbeRecord> pr(verdicts.size());
    rethrow_first(lm::run_bounded(verdicts.size(), embed.max_parallel, [&](std::size_t i) {
      const auto& v = verdicts[i];
      pr[i].id = v.id;
      pr[i].verdict = v.parsed->verdict;
      pr[i].gold = gold.at(v.id)->label;
      pr[i].original_embedding = client.embed(embed, v.parsed->rationale);
      pr[i].masked_embedding = client.embed(embed, diagnostics::mask_labels(v.parsed->rationale).text);
    }));
    diagnostics::ProbeOptions opts;
    opts.test_fraction = a.test_fraction;
    opts.seed = c.cfg.seed;
    opts.logreg.l2 = a.l2;
    const auto slices = diagnostics::probe_slices(pr, opts);
    json sj = json::array();
    for (const auto& s : slices) {
      json e{{"representation", s.representation}, {"subset", s.subset},   {"train_size", s.train_size},
             {"test_size", s.test_size},           {"accuracy", rate_json(s.accuracy)}, {"note", s.note}};
      e["auroc"] = s.auroc ? json(*s.auroc) : json(nullptr);
      if (s.model) {
        const auto file = "probe_weights/" + s.representation + "-" + s.subset + ".txt";
        run.write_text(file, diagnostics::serialize_weights(*s.model));
        e["weights"] = file;
        e["converged"] = s.model->converged;
      }
      sj.push_back(std::move(e));
    }
    run.write_text("probe.csv", diagnostics::probe_csv(slices));
    report["probe"] = std::move(sj);
  } else {
    const std::string why = a.no_probe ? "disabled by --no-probe" : "embed endpoint is not configured";
    if (!a.no_probe) spdlog::warn("probe skipped: {}", why);
    report["probe_skipped"] = why;
  }
  run.write_json("diagnose.json", report);
  finish(c, run);
  return 0;
}

// ---------------------------------------------------------------------------
// attack

struct AttackArgs {
  std::string input;
  std::string kind;
  double rate = 0.1;
  double mix_ratio = 0.3;
  std::string pool;
  std::string confusables;
  bool all = false;
  std::string source_language = "English";
  std::string pivot_language = "Chinese";
};

std::string translate(lm::Client& client, const lm::EndpointConfig& chat, std::string_view text, const std::string& from,
                      const std::string& to) {
  std::string prompt = "Translate the following text from " + from + " to " + to +
                       ". Reply with the translation only.\n\n";
  prompt += text;
  return trim(client.chat_complete(chat, "", prompt, 0.0));
}

int cmd_attack(Ctx& c, const AttackArgs& a) {
  const auto kind = corpus::parse_attack_kind(a.kind);
  if (!kind) throw ConfigError("--kind must be mixed, paraphrase or homoglyph");
  const lm::EndpointConfig* chat = *kind == corpus::AttackKind::Paraphrase ? &c.cfg.endpoint("chat") : nullptr;
  const auto records = load_records(a.input);

  std::vector<Input> inputs{{"corpus", a.input}};
  json params{{"kind", std::string(corpus::to_string(*kind))}, {"all", a.all}};
  corpus::AttackSpec spec;
  spec.kind = *kind;
  spec.seed = c.cfg.seed;
  corpus::AttackContext ctx;
  std::optional<corpus::ConfusableMap> confusables;
  std::vector<std::string> pool;

  switch (*kind) {
    case corpus::AttackKind::Homoglyph:
      if (!(a.rate >= 0.0 && a.rate <= 1.0)) throw ConfigError("--rate must be in [0, 1]");
      spec.substitution_rate = a.rate;
      params["rate"] = a.rate;
      if (!a.confusables.empty()) {
        confusables = corpus::ConfusableMap::load(a.confusables);
        ctx.confusables = &*confusables;
        inputs.push_back({"confusables", a.confusables});
      }
      break;
    case corpus::AttackKind::Mixed: {
      spec.mix_ratio = a.mix_ratio;
      params["mix_ratio"] = a.mix_ratio;
      std::vector<corpus::LabeledText> source;
      if (!a.pool.empty()) {
        source = load_records(a.pool);
        inputs.push_back({"pool", a.pool});
      }
      for (const auto& r : a.pool.empty() ? records : source) {
        if (r.label == Authorship::Human) pool.push_back(r.text);
      }
      ctx.human_pool = pool;
      break;
    }
    case corpus::AttackKind::Paraphrase:
      params["source_language"] = a.source_language;
      params["pivot_language"] = a.pivot_language;
      ctx.rewriter = [&c, chat, &a](std::string_view text) {
        const auto pivot = translate(c.client(), *chat, text, a.source_language, a.pivot_language);
        return translate(c.client(), *chat, pivot, a.pivot_language, a.source_language);
      };
      break;
  }

  auto run = open_run(c, "attack", scoped_config(c.cfg, {"chat"}), params, inputs);
  std::vector<corpus::LabeledText> out(records.size());
  const int workers = chat ? chat->max_parallel : 1;
  rethrow_first(lm::run_bounded(records.size(), workers, [&](std::size_t i) {
    const bool target = a.all || records[i].label == Authorship::Ai;
    out[i] = target ? corpus::apply_attack(records[i], spec, ctx) : records[i];
  }));
  std::size_t attacked = 0;
  for (const auto& r : out) attacked += r.attack.has_value();
  run.write_jsonl("attacked.jsonl", records_json(out));
  run.write_json("attack.json", {{"params", params}, {"attacked", attacked}, {"unchanged", out.size() - attacked}});
  finish(c, run);
  return 0;
}

// ---------------------------------------------------------------------------

RunConfig effective_config(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig{} : load_config(g.config);
  for (const auto& [role, url] : g.urls) {
    if (!url.empty()) cfg.mutable_endpoint(role).base_url = url;
  }
  for (const auto& [role, model] : g.models) {
    if (!model.empty()) cfg.mutable_endpoint(role).model_name = model;
  }
  if (!g.cache_dir.empty()) cfg.cache_dir = g.cache_dir;
  if (!g.out_dir.empty()) cfg.out_dir = g.out_dir;
  if (g.seed) cfg.seed = *g.seed;
  if (g.top_k) {
    if (*g.top_k < 1) throw ConfigError("--top-k must be >= 1");
    cfg.top_k = *g.top_k;
  }
  return cfg;
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err, bool verbose) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  sink->set_pattern("%l: %v");
  auto logger = std::make_shared<spdlog::logger>("aigt", sink);
  logger->set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  return logger;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Detection pipeline for AI-generated text", "aigt"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "JSON config file");
  for (const auto& [role, cap] : kEndpointRoles) {
    const std::string r(role);
    app.add_option("--" + r + "-url", g.urls[r], r + " endpoint base URL");
    app.add_option("--" + r + "-model", g.models[r], r + " endpoint model name");
  }
  app.add_option("--cache-dir", g.cache_dir, "response cache directory");
  app.add_option("--out", g.out_dir, "root for run directories");
  app.add_option("--seed", g.seed, "seed for splits, perturbations and probes");
  app.add_option("--top-k", g.top_k, "alternatives requested per scored token");
  app.add_flag("-v,--verbose", g.verbose, "debug logging");

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "validate and normalize a JSONL corpus");
  s_ingest->add_option("--input", ingest.input)->required();

  SplitArgs split;
  auto* s_split = app.add_subcommand("split", "stratified train/test split");
  s_split->add_option("--input", split.input)->required();
  s_split->add_option("--test-fraction", split.test_fraction)->capture_default_str();
  s_split->add_option("--stratify", split.stratify)->capture_default_str();

  TeachArgs teach;
  auto* s_teach = app.add_subcommand("teach", "collect teacher rationales");
  s_teach->add_option("--input", teach.input)->required();
  s_teach->add_option("--prompt", teach.prompt)->capture_default_str();
  s_teach->add_option("--template-file", teach.template_file, "custom prompt body with one {{TEXT}} slot");
  s_teach->add_flag("--judge", teach.judge, "score each rationale with the judge endpoint");

  FilterArgs filter;
  auto* s_filter = app.add_subcommand("filter", "split teacher completions into SFT and GRPO sets");
  s_filter->add_option("--texts", filter.texts)->required();
  s_filter->add_option("--completions", filter.completions)->required();
  s_filter->add_option("--pool", filter.pool, "extra unprompted instances for GRPO");

  ScoreArgs score;
  auto* s_score = app.add_subcommand("score", "zero-shot detector scores");
  s_score->add_option("--input", score.input)->required();
  s_score->add_option("--scorer", score.scorers)->delimiter(',')->capture_default_str();
  s_score->add_option("--perturbations", score.perturbations)->capture_default_str();
  s_score->add_option("--regenerations", score.regenerations)->capture_default_str();
  s_score->add_option("--prefix-fraction", score.prefix_fraction)->capture_default_str();
  s_score->add_option("--ngram", score.ngram)->capture_default_str();
  s_score->add_option("--exec", score.exec, "serial | parallel")->capture_default_str();

  DetectArgs detect;
  auto* s_detect = app.add_subcommand("detect", "LLM verdicts with format accounting");
  s_detect->add_option("--input", detect.input)->required();
  s_detect->add_option("--prompt", detect.prompt)->capture_default_str();
  s_detect->add_option("--template-file", detect.template_file);

  TuneArgs tune;
  auto* s_tune = app.add_subcommand("tune", "oracle thresholds for a score matrix");
  s_tune->add_option("--scores", tune.scores)->required();
  s_tune->add_option("--scope", tune.scope, "global | per-domain")->capture_default_str();
  s_tune->add_flag("--pin-direction", tune.pin_direction, "per-domain fits reuse the global direction");

  EvalArgs ev;
  auto* s_eval = app.add_subcommand("eval", "apply thresholds and report metrics");
  s_eval->add_option("--scores", ev.scores)->required();
  s_eval->add_option("--thresholds", ev.thresholds)->required();

  TrainArgs train;
  auto* s_train = app.add_subcommand("trainmath-export", "GRPO advantages and SFT losses");
  s_train->add_option("--groups", train.groups, "JSONL of {prompt_id, gold, completions}");
  s_train->add_option("--sft", train.sft, "JSONL of {id, rationale_logprobs, label_logprobs}");
  s_train->add_option("--prompt", train.prompt)->capture_default_str();
  s_train->add_option("--reward-correct", train.correct);
  s_train->add_option("--reward-incorrect", train.incorrect);
  s_train->add_option("--reward-unparseable", train.unparseable);

  DiagnoseArgs diag;
  auto* s_diag = app.add_subcommand("diagnose", "rationale consistency and embedding probes");
  s_diag->add_option("--verdicts", diag.verdicts)->required();
  s_diag->add_option("--corpus", diag.corpus)->required();
  s_diag->add_option("--prompt", diag.prompt)->capture_default_str();
  s_diag->add_flag("--no-probe", diag.no_probe);
  s_diag->add_option("--test-fraction", diag.test_fraction)->capture_default_str();
  s_diag->add_option("--l2", diag.l2)->capture_default_str();

  AttackArgs attack;
  auto* s_attack = app.add_subcommand("attack", "adversarial rewrites");
  s_attack->add_option("--input", attack.input)->required();
  s_attack->add_option("--kind", attack.kind, "mixed | paraphrase | homoglyph")->required();
  s_attack->add_option("--rate", attack.rate, "homoglyph substitution rate")->capture_default_str();
  s_attack->add_option("--mix-ratio", attack.mix_ratio, "share of human sentences")->capture_default_str();
  s_attack->add_option("--pool", attack.pool, "corpus supplying human sentences");
  s_attack->add_option("--confusables", attack.confusables, "confusables TSV");
  s_attack->add_flag("--all", attack.all, "attack human records too");
  s_attack->add_option("--source-language", attack.source_language)->capture_default_str();
  s_attack->add_option("--pivot-language", attack.pivot_language)->capture_default_str();

  ReportArgs report;
  auto* s_report = app.add_subcommand("report", "comparison table over eval runs");
  s_report->add_option("--eval", report.evals, "[name=]path to eval.json or its run directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  auto previous = spdlog::default_logger();
  spdlog::set_default_logger(make_logger(err, g.verbose));
  struct Restore {
    std::shared_ptr<spdlog::logger> logger;
    ~Restore() { spdlog::set_default_logger(logger); }
  } restore{previous};

  try {
    Ctx c(effective_config(g), out);
    if (s_ingest->parsed()) return cmd_ingest(c, ingest);
    if (s_split->parsed()) return cmd_split(c, split);
    if (s_teach->parsed()) return cmd_teach(c, teach);
    if (s_filter->parsed()) return cmd_filter(c, filter);
    if (s_score->parsed()) return cmd_score(c, score);
    if (s_detect->parsed()) return cmd_detect(c, detect);
    if (s_tune->parsed()) return cmd_tune(c, tune);
    if (s_eval->parsed()) return cmd_eval(c, ev);
    if (s_train->parsed()) return cmd_trainmath(c, train);
    if (s_diag->parsed()) return cmd_diagnose(c, diag);
    if (s_attack->parsed()) return cmd_attack(c, attack);
    if (s_report->parsed()) return cmd_report(c, report);
    return 1;
  } catch (const NetworkError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const ProtocolError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const json::exception& e) {
    spdlog::error("malformed JSON input: {}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}

}  // namespace aigt::cli
