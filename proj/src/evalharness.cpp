#include "aigt/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace aigt::eval {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json tau_json(double tau) {
  if (tau == kInf) return "+inf";
  if (tau == -kInf) return "-inf";
  return tau;
}

double tau_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "+inf" || s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    throw ConfigError("bad threshold value '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace

std::string_view to_string(Direction d) { return d == Direction::Ge ? "GE" : "LT"; }

std::string_view to_string(Scope s) { return s == Scope::Global ? "global" : "per-domain"; }

std::optional<Scope> parse_scope(std::string_view s) {
  const auto key = to_lower_ascii(trim(s));
  if (key == "global") return Scope::Global;
  if (key == "per-domain" || key == "per_domain" || key == "perdomain") return Scope::PerDomain;
  return std::nullopt;
}

std::vector<double> candidate_thresholds(std::span<const double> scores) {
  std::vector<double> u(scores.begin(), scores.end());
  std::sort(u.begin(), u.end());
  u.erase(std::unique(u.begin(), u.end()), u.end());
  std::vector<double> out;
  out.reserve(u.size() + 1);
  out.push_back(-kInf);
  for (std::size_t j = 0; j + 1 < u.size(); ++j) {
    double m = std::midpoint(u[j], u[j + 1]);
    if (!(m > u[j])) m = u[j + 1];
    out.push_back(m);
  }
  out.push_back(kInf);
  return out;
}

ThresholdFit fit_threshold(std::span<const double> scores, std::span<const Authorship> golds,
                           std::optional<Direction> pin) {
  if (scores.empty()) throw PreconditionError("cannot tune a threshold on an empty set");
  if (scores.size() != golds.size()) throw PreconditionError("scores and golds have different lengths");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double s : scores) {
    if (!std::isfinite(s)) throw PreconditionError("scores must be finite");
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  std::uint64_t ai = 0;
  for (auto g : golds) ai += g == Authorship::Ai ? 1 : 0;

  // At tau = -inf the GE rule calls everything AI.
  std::uint64_t ge_correct = ai;
  ThresholdFit best;
  best.total = n;
  bool have = false;
  auto consider = [&](double tau) {
    for (auto d : {Direction::Ge, Direction::Lt}) {
      if (pin && *pin != d) continue;
      const std::uint64_t c = d == Direction::Ge ? ge_correct : n - ge_correct;
      if (!have || c > best.correct) {
        best.rule = {tau, d};
        best.correct = c;
        have = true;
      }
    }
  };
  consider(-kInf);
  std::size_t i = 0;
  while (i < n) {
    const double v = scores[order[i]];
    std::size_t j = i;
    // every instance with this value moves below the next threshold
    while (j < n && scores[order[j]] == v) {
      if (golds[order[j]] == Authorship::Ai) --ge_correct;
      else ++ge_correct;
      ++j;
    }
    double tau = kInf;
    if (j < n) {
      tau = std::midpoint(v, scores[order[j]]);
      if (!(tau > v)) tau = scores[order[j]];
    }
    consider(tau);
    i = j;
  }
  return best;
}

const Rule& ThresholdConfig::rule_for(const std::string& domain) const {
  const auto key = scope == Scope::Global ? std::string(kGlobalKey) : domain;
  auto it = thresholds.find(key);
  if (it == thresholds.end()) throw ConfigError("no threshold for domain '" + domain + "'");
  return it->second;
}

json to_json(const ThresholdConfig& c) {
  json th = json::object();
  for (const auto& [k, r] : c.thresholds) {
    json e{{"tau", tau_json(r.tau)}, {"direction", std::string(to_string(r.direction))}};
    if (auto it = c.fits.find(k); it != c.fits.end()) {
      e["correct"] = it->second.correct;
      e["total"] = it->second.total;
      e["accuracy"] = rate_json(it->second.accuracy());
    }
    th[k] = std::move(e);
  }
  return json{{"scope", std::string(to_string(c.scope))}, {"thresholds", std::move(th)}};
}

ThresholdConfig threshold_config_from_json(const json& j) {
  ThresholdConfig c;
  auto scope = parse_scope(j.at("scope").get<std::string>());
  if (!scope) throw ConfigError("unknown threshold scope");
  c.scope = *scope;
  for (const auto& [k, e] : j.at("thresholds").items()) {
    const auto dir = e.at("direction").get<std::string>();
    if (dir != "GE" && dir != "LT") throw ConfigError("unknown direction '" + dir + "'");
    c.thresholds[k] = Rule{tau_from_json(e.at("tau")), dir == "GE" ? Direction::Ge : Direction::Lt};
  }
  if (c.scope == Scope::Global && (c.thresholds.size() != 1 || !c.thresholds.count(std::string(kGlobalKey)))) {
    throw ConfigError("a global threshold config must hold exactly the '*' entry");
  }
  return c;
}

namespace {

ThresholdFit fit_subset(std::span<const ScoredInstance> instances, const std::vector<std::size_t>& members,
                        std::optional<Direction> pin) {
  std::vector<double> s;
  std::vector<Authorship> g;
  s.reserve(members.size());
  g.reserve(members.size());
  for (auto m : members) {
    s.push_back(instances[m].score);
    g.push_back(instances[m].gold);
  }
  return fit_threshold(s, g, pin);
}

std::vector<std::size_t> all_members(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

struct Job {
  const std::vector<ScoredInstance>* instances;
  std::string key;
  std::vector<std::size_t> members;
  std::optional<Direction> pin;
  ThresholdFit fit;
};

void run_jobs(std::vector<Job>& jobs, Exec exec) {
  const auto n = static_cast<std::ptrdiff_t>(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const bool parallel = exec == Exec::Parallel;
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      jobs[i].fit = fit_subset(*jobs[i].instances, jobs[i].members, jobs[i].pin);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::map<std::string, std::vector<std::size_t>> by_domain(std::span<const ScoredInstance> instances) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < instances.size(); ++i) out[instances[i].domain].push_back(i);
  return out;
}

}  // namespace

ThresholdConfig oracle_threshold(std::span<const ScoredInstance> instances, Scope scope, bool pin_direction) {
  std::map<std::string, std::vector<ScoredInstance>> one{{"", {instances.begin(), instances.end()}}};
  return tune_all(one, scope, pin_direction, Exec::Serial).begin()->second;
}

std::map<std::string, ThresholdConfig> tune_all(const std::map<std::string, std::vector<ScoredInstance>>& matrix,
                                                Scope scope, bool pin_direction, Exec exec) {
  for (const auto& [name, inst] : matrix) {
    if (inst.empty()) throw PreconditionError("cannot tune a threshold on an empty set ('" + name + "')");
  }
  // Global fits are needed as the GLOBAL answer and as the pinned direction.
  std::vector<Job> globals;
  const bool need_global = scope == Scope::Global || pin_direction;
  if (need_global) {
    for (const auto& [name, inst] : matrix) globals.push_back({&inst, name, all_members(inst.size()), {}, {}});
    run_jobs(globals, exec);
  }
  std::map<std::string, ThresholdConfig> out;
  if (scope == Scope::Global) {
    for (auto& j : globals) {
      auto& c = out[j.key];
      c.scope = Scope::Global;
      c.thresholds[std::string(kGlobalKey)] = j.fit.rule;
      c.fits[std::string(kGlobalKey)] = j.fit;
    }
    return out;
  }
  std::map<std::string, Direction> pinned;
  for (const auto& j : globals) pinned[j.key] = j.fit.rule.direction;

  std::vector<Job> jobs;
  std::vector<std::string> owners;
  for (const auto& [name, inst] : matrix) {
    for (auto& [domain, members] : by_domain(inst)) {
      std::optional<Direction> pin;
      if (pin_direction) pin = pinned.at(name);
      jobs.push_back({&inst, domain, std::move(members), pin, {}});
      owners.push_back(name);
    }
  }
  run_jobs(jobs, exec);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& c = out[owners[i]];
    c.scope = Scope::PerDomain;
    c.thresholds[jobs[i].key] = jobs[i].fit.rule;
    c.fits[jobs[i].key] = jobs[i].fit;
  }
  return out;
}

void Confusion::add(bool predicted_ai, Authorship gold) {
  const bool is_ai = gold == Authorship::Ai;
  if (predicted_ai && is_ai) ++tp;
  else if (predicted_ai) ++fp;
  else if (is_ai) ++fn;
  else ++tn;
}

json to_json(const Confusion& c) {
  return json{{"tp", c.tp},
              {"fp", c.fp},
              {"tn", c.tn},
              {"fn", c.fn},
              {"accuracy", rate_json(c.accuracy())},
              {"fpr", rate_json(c.fpr())},
              {"tpr", rate_json(c.tpr())}};
}

Confusion confusion_from_json(const json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>(),
          j.at("fn").get<std::uint64_t>()};
}

json to_json(const EvalReport& r) {
  json domains = json::object();
  for (const auto& [d, c] : r.per_domain) domains[d] = to_json(c);
  json buckets = json::array();
  for (const auto& b : r.per_bucket) {
    auto j = to_json(b.confusion);
    j["bucket"] = b.label;
    buckets.push_back(std::move(j));
  }
  return json{{"overall", to_json(r.overall)},
              {"per_domain", std::move(domains)},
              {"per_bucket", std::move(buckets)},
              {"provenance", r.provenance}};
}

EvalReport eval_report_from_json(const json& j) {
  EvalReport r;
  r.overall = confusion_from_json(j.at("overall"));
  for (const auto& [d, c] : j.at("per_domain").items()) r.per_domain[d] = confusion_from_json(c);
  for (const auto& b : j.value("per_bucket", json::array())) {
    r.per_bucket.push_back({b.at("bucket").get<std::string>(), confusion_from_json(b)});
  }
  r.provenance = j.value("provenance", json::object());
  return r;
}

EvalReport evaluate(std::span<const ScoredInstance> instances, const ThresholdConfig& config,
                    std::span<const std::size_t> length_edges) {
  EvalReport r;
  auto buckets = corpus::make_length_buckets(length_edges);
  std::vector<Confusion> bucket_conf(buckets.size());
  for (const auto& inst : instances) {
    const bool ai = config.rule_for(inst.domain).predicts_ai(inst.score);
    r.overall.add(ai, inst.gold);
    r.per_domain[inst.domain].add(ai, inst.gold);
    bucket_conf[corpus::bucket_index(inst.tokens, length_edges)].add(ai, inst.gold);
  }
  for (std::size_t b = 0; b < buckets.size(); ++b) r.per_bucket.push_back({buckets[b].label, bucket_conf[b]});
  return r;
}

// ---------------------------------------------------------------------------

ComparisonTable compare_reports(std::span<const std::pair<std::string, EvalReport>> reports) {
  ComparisonTable t;
  std::set<std::string> domains;
  for (const auto& [name, r] : reports) {
    t.rows.push_back(name);
    for (const auto& [d, c] : r.per_domain) domains.insert(d);
  }
  for (const auto& d : domains) t.columns.push_back(d);
  t.columns.insert(t.columns.end(), {"Acc", "FPR", "TPR"});
  const std::size_t nd = domains.size();

  for (const auto& [name, r] : reports) {
    std::vector<Rate> row;
    for (const auto& d : domains) {
      auto it = r.per_domain.find(d);
      row.push_back(it == r.per_domain.end() ? Rate{} : it->second.accuracy());
    }
    row.push_back(r.overall.accuracy());
    row.push_back(r.overall.fpr());
    row.push_back(r.overall.tpr());
    t.cells.push_back(std::move(row));
  }

  t.marks.assign(t.rows.size(), std::vector<Mark>(t.columns.size(), Mark::None));
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    const bool lower_better = c == nd + 1;
    auto better = [&](const Rate& a, const Rate& b) { return lower_better ? exact_less(a, b) : exact_less(b, a); };
    std::vector<std::size_t> defined;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (t.cells[r][c].defined()) defined.push_back(r);
    }
    if (defined.size() < 2) continue;
    std::vector<Rate> distinct;
    for (auto r : defined) {
      const auto& v = t.cells[r][c];
      if (std::none_of(distinct.begin(), distinct.end(), [&](const Rate& x) { return x == v; })) distinct.push_back(v);
    }
    std::sort(distinct.begin(), distinct.end(), better);
    for (auto r : defined) {
      if (t.cells[r][c] == distinct[0]) t.marks[r][c] = Mark::Best;
      else if (defined.size() >= 3 && distinct.size() > 1 && t.cells[r][c] == distinct[1]) t.marks[r][c] = Mark::Second;
    }
  }
  return t;
}

std::string ComparisonTable::markdown() const {
  std::ostringstream out;
  out << "| Detector |";
  for (const auto& c : columns) out << ' ' << c << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << "---:|";
  out << '\n';
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out << "| " << rows[r] << " |";
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto v = cells[r][c].fixed(3);
      switch (marks[r][c]) {
        case Mark::Best:
          out << " **" << v << "** |";
          break;
        case Mark::Second:
          out << " <u>" << v << "</u> |";
          break;
        case Mark::None:
          out << ' ' << v << " |";
          break;
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string ComparisonTable::csv() const {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  };
  std::ostringstream out;
  out << "detector,metric,num,den,value,mark\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto& cell = cells[r][c];
      out << quote(rows[r]) << ',' << quote(columns[c]) << ',' << cell.num << ',' << cell.den << ',';
      out << (cell.defined() ? cell.fixed(6) : std::string()) << ',';
      out << (marks[r][c] == Mark::Best ? "best" : marks[r][c] == Mark::Second ? "second" : "") << '\n';
    }
  }
  return out.str();
}

}  // namespace aigt::eval
