#include "aigt/diagnostics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "aigt/embedded_assets.hpp"
#include "aigt/rng.hpp"

namespace aigt::diagnostics {

namespace {

// Bytes >= 0x80 count as word characters so multi-byte letters never split a word.
bool word_byte(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u >= 0x80 || std::isalnum(u) != 0 || c == '_';
}

bool ieq(char a, char b) {
  return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
}

/// Whole-word match of `phrase` at `pos`.
bool matches_at(std::string_view text, std::size_t pos, std::string_view phrase, bool case_sensitive) {
  if (phrase.empty() || pos + phrase.size() > text.size()) return false;
  if (pos > 0 && word_byte(text[pos - 1])) return false;
  const auto end = pos + phrase.size();
  if (end < text.size() && word_byte(text[end])) return false;
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    const char a = text[pos + i];
    if (case_sensitive ? a != phrase[i] : !ieq(a, phrase[i])) return false;
  }
  return true;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_problem(const Matrix& x, std::span<const int> y, std::size_t dim) {
  if (x.empty()) throw PreconditionError("logistic regression needs at least one example");
  if (x.size() != y.size()) throw PreconditionError("features and labels have different lengths");
  for (const auto& row : x) {
    if (row.size() != dim) throw PreconditionError("inconsistent feature dimension");
  }
  for (int v : y) {
    if (v != 0 && v != 1) throw PreconditionError("labels must be 0 or 1");
  }
}

double dot(std::span<const double> w, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

}  // namespace

LabelLexicon LabelLexicon::parse(std::string_view text) {
  LabelLexicon lex;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ls(t);
    std::string kind;
    ls >> kind;
    std::string rest;
    std::getline(ls, rest);
    rest = trim(rest);
    if (kind == "mask") {
      if (rest.empty()) throw ConfigError("lexicon line " + std::to_string(line_no) + ": empty mask entry");
      lex.mask_words.push_back(to_lower_ascii(rest));
    } else if (kind == "assert") {
      const auto sp = rest.find(' ');
      auto label = parse_authorship(rest.substr(0, sp));
      if (!label || sp == std::string::npos) {
        throw ConfigError("lexicon line " + std::to_string(line_no) + ": expected 'assert <AI|HUMAN> [cs] <phrase>'");
      }
      auto phrase = trim(rest.substr(sp + 1));
      bool cs = false;
      if (phrase.rfind("cs ", 0) == 0) {
        cs = true;
        phrase = trim(phrase.substr(3));
      }
      lex.assertions.push_back({phrase, *label, cs});
    } else {
      throw ConfigError("lexicon line " + std::to_string(line_no) + ": unknown directive '" + kind + "'");
    }
  }
  return lex;
}

LabelLexicon LabelLexicon::load(const std::filesystem::path& path) { return parse(read_text(path)); }

const LabelLexicon& LabelLexicon::builtin() {
  static const LabelLexicon lex = parse(assets::label_lexicon_v1);
  return lex;
}

std::optional<Authorship> extract_rationale_label(std::string_view rationale, const LabelLexicon& lexicon) {
  std::optional<Authorship> label;
  std::size_t best_pos = 0;
  std::size_t best_len = 0;
  for (std::size_t pos = 0; pos < rationale.size(); ++pos) {
    for (const auto& a : lexicon.assertions) {
      if (!matches_at(rationale, pos, a.phrase, a.case_sensitive)) continue;
      if (!label || pos > best_pos || (pos == best_pos && a.phrase.size() > best_len)) {
        label = a.label;
        best_pos = pos;
        best_len = a.phrase.size();
      }
    }
  }
  return label;
}

ConsistencySummary consistency_rate(std::span<const ConsistencyRecord> records) {
  ConsistencySummary s;
  s.total = records.size();
  for (const auto& r : records) {
    auto m = r.match();
    if (!m) {
      ++s.absent;
      continue;
    }
    ++s.match_rate.den;
    if (*m) ++s.match_rate.num;
  }
  return s;
}

MaskedRationale mask_labels(std::string_view rationale, std::span<const std::string> vocabulary) {
  std::vector<std::string> vocab(vocabulary.begin(), vocabulary.end());
  std::stable_sort(vocab.begin(), vocab.end(), [](const auto& a, const auto& b) { return a.size() > b.size(); });
  MaskedRationale out;
  std::size_t pos = 0;
  std::size_t copied = 0;
  while (pos < rationale.size()) {
    const std::string* hit = nullptr;
    for (const auto& w : vocab) {
      if (matches_at(rationale, pos, w, false)) {
        hit = &w;
        break;
      }
    }
    if (!hit) {
      ++pos;
      continue;
    }
    out.text.append(rationale.substr(copied, pos - copied));
    out.text.append(kMaskToken);
    out.spans.push_back({pos, pos + hit->size(), std::string(rationale.substr(pos, hit->size()))});
    pos += hit->size();
    copied = pos;
  }
  out.text.append(rationale.substr(copied));
  return out;
}

MaskedRationale mask_labels(std::string_view rationale) {
  return mask_labels(rationale, LabelLexicon::builtin().mask_words);
}

std::string reconstruct(const MaskedRationale& m) {
  std::string out;
  std::size_t orig = 0;
  std::size_t mpos = 0;
  for (const auto& s : m.spans) {
    if (s.start < orig || s.end < s.start) throw PreconditionError("mask spans overlap or are unordered");
    const auto gap = s.start - orig;
    if (m.text.compare(mpos + gap, kMaskToken.size(), kMaskToken) != 0) {
      throw PreconditionError("masked text does not match its span ledger");
    }
    out.append(m.text, mpos, gap);
    out.append(s.original);
    mpos += gap + kMaskToken.size();
    orig = s.end;
  }
  out.append(m.text, mpos);
  return out;
}

// ---------------------------------------------------------------------------

double LogRegModel::decision(std::span<const double> x) const {
  if (x.size() != feature_dim) throw PreconditionError("feature dimension mismatch");
  return dot(weights, x) + bias;
}

double LogRegModel::probability(std::span<const double> x) const { return sigmoid(decision(x)); }

double logreg_objective(std::span<const double> weights, double bias, const Matrix& x, std::span<const int> y,
                        double l2) {
  check_problem(x, y, weights.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = dot(weights, x[i]) + bias;
    loss += softplus(z) - y[i] * z;
  }
  loss /= static_cast<double>(x.size());
  double reg = 0.0;
  for (double w : weights) reg += w * w;
  return loss + 0.5 * l2 * reg;
}

std::vector<double> logreg_gradient(std::span<const double> weights, double bias, const Matrix& x,
                                    std::span<const int> y, double l2) {
  check_problem(x, y, weights.size());
  const std::size_t d = weights.size();
  std::vector<double> g(d + 1, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = sigmoid(dot(weights, x[i]) + bias) - y[i];
    for (std::size_t k = 0; k < d; ++k) g[k] += r * x[i][k];
    g[d] += r;
  }
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 0; k < d; ++k) g[k] = g[k] / n + l2 * weights[k];
  g[d] /= n;
  return g;
}

LogRegModel train_logreg(const Matrix& x, std::span<const int> y, const LogRegOptions& opts) {
  if (opts.l2 < 0) throw ConfigError("l2 must be non-negative");
  if (x.empty()) throw PreconditionError("logistic regression needs at least one example");
  const std::size_t d = x.front().size();
  check_problem(x, y, d);
  const auto pos = std::count(y.begin(), y.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(y.size())) {
    throw PreconditionError("logistic regression needs both classes");
  }

  LogRegModel m;
  m.feature_dim = d;
  m.weights.assign(d, 0.0);
  double f = logreg_objective(m.weights, m.bias, x, y, opts.l2);
  m.loss_history.push_back(f);
  double step = 1.0;
  std::vector<double> trial(d);
  for (m.iterations = 0; m.iterations < opts.max_iters; ++m.iterations) {
    const auto g = logreg_gradient(m.weights, m.bias, x, y, opts.l2);
    double gg = 0.0;
    for (double v : g) gg += v * v;
    if (std::sqrt(gg) < opts.tol) {
      m.converged = true;
      break;
    }
    bool accepted = false;
    for (double t = step; t > 1e-20; t *= 0.5) {
      for (std::size_t k = 0; k < d; ++k) trial[k] = m.weights[k] - t * g[k];
      const double tb = m.bias - t * g[d];
      const double ft = logreg_objective(trial, tb, x, y, opts.l2);
      if (ft <= f - 1e-4 * t * gg) {
        m.weights.swap(trial);
        m.bias = tb;
        f = ft;
        step = t * 2.0;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;  // no descent possible at double precision
    m.loss_history.push_back(f);
  }
  return m;
}

std::string serialize_weights(const LogRegModel& m) {
  std::ostringstream out;
  out.precision(17);
  out << "dim " << m.feature_dim << '\n' << m.bias << '\n';
  for (double w : m.weights) out << w << '\n';
  return out.str();
}

LogRegModel parse_weights(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tag;
  LogRegModel m;
  if (!(in >> tag >> m.feature_dim) || tag != "dim") throw ConfigError("weights file must start with 'dim <d>'");
  if (!(in >> m.bias)) throw ConfigError("weights file has no bias");
  m.weights.resize(m.feature_dim);
  for (auto& w : m.weights) {
    if (!(in >> w)) throw ConfigError("weights file is shorter than its dim header");
  }
  return m;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw PreconditionError("scores and labels have different lengths");
  std::uint64_t p = 0;
  for (int v : labels) {
    if (v != 0 && v != 1) throw PreconditionError("labels must be 0 or 1");
    p += static_cast<std::uint64_t>(v);
  }
  const std::uint64_t n = labels.size() - p;
  if (p == 0 || n == 0) throw PreconditionError("AUROC needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // twice the positive rank sum; a tie group spanning ranks [lo, hi] gives each member lo + hi
  unsigned __int128 rank2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t pos_in_group = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      pos_in_group += static_cast<std::uint64_t>(labels[order[j]]);
      ++j;
    }
    rank2 += static_cast<unsigned __int128>(pos_in_group) * ((i + 1) + j);
    i = j;
  }
  const auto u2 = static_cast<double>(rank2 - static_cast<unsigned __int128>(p) * (p + 1));
  return u2 / (2.0 * static_cast<double>(p) * static_cast<double>(n));
}

// ---------------------------------------------------------------------------

std::vector<SliceResult> probe_slices(std::span<const ProbeRecord> records, const ProbeOptions& opts) {
  if (!(opts.test_fraction > 0.0 && opts.test_fraction < 1.0)) throw ConfigError("test fraction must be in (0, 1)");
  std::vector<SliceResult> out;
  for (std::string_view subset : {"all", "correct", "wrong"}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const bool correct = records[i].verdict == records[i].gold;
      if (subset == "all" || (subset == "correct") == correct) members.push_back(i);
    }
    // one split per subset, shared by both representations
    std::vector<bool> is_test(records.size(), false);
    for (int cls : {0, 1}) {
      std::vector<std::size_t> idx;
      for (auto m : members) {
        if ((records[m].verdict == Authorship::Ai ? 1 : 0) == cls) idx.push_back(m);
      }
      Rng rng(mix_seed(opts.seed, std::string(subset) + ":" + std::to_string(cls)));
      rng.shuffle(idx);
      auto k = static_cast<std::size_t>(std::llround(opts.test_fraction * static_cast<double>(idx.size())));
      if (idx.size() > 0) k = std::min(k, idx.size() - 1);
      for (std::size_t t = 0; t < k; ++t) is_test[idx[t]] = true;
    }

    for (std::string_view rep : {"original", "masked"}) {
      SliceResult r;
      r.representation = rep;
      r.subset = subset;
      Matrix xtr, xte;
      std::vector<int> ytr, yte;
      for (auto m : members) {
        const auto& e = rep == "original" ? records[m].original_embedding : records[m].masked_embedding;
        const int label = records[m].verdict == Authorship::Ai ? 1 : 0;
        if (is_test[m]) {
          xte.push_back(e);
          yte.push_back(label);
        } else {
          xtr.push_back(e);
          ytr.push_back(label);
        }
      }
      r.train_size = xtr.size();
      r.test_size = xte.size();
      const auto tr_pos = std::count(ytr.begin(), ytr.end(), 1);
      if (tr_pos == 0 || tr_pos == static_cast<std::ptrdiff_t>(ytr.size())) {
        r.note = "training split holds a single verdict class";
        out.push_back(std::move(r));
        continue;
      }
      auto model = train_logreg(xtr, ytr, opts.logreg);
      std::vector<double> s;
      for (std::size_t i = 0; i < xte.size(); ++i) {
        s.push_back(model.decision(xte[i]));
        r.accuracy.den += 1;
        if ((s.back() >= 0.0 ? 1 : 0) == yte[i]) r.accuracy.num += 1;
      }
      const auto te_pos = std::count(yte.begin(), yte.end(), 1);
      if (te_pos > 0 && te_pos < static_cast<std::ptrdiff_t>(yte.size())) r.auroc = auroc(s, yte);
      else r.note = "test split holds a single verdict class";
      r.model = std::move(model);
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::string consistency_csv(const ConsistencySummary& s) {
  std::ostringstream out;
  out << "metric,value\n";
  out << "rationale_verdict_match_rate," << (s.match_rate.defined() ? s.match_rate.fixed(3) : "") << '\n';
  out << "labeled_records," << s.match_rate.den << '\n';
  out << "no_explicit_label_statement," << s.absent << '\n';
  out << "total_records," << s.total << '\n';
  return out.str();
}

std::string probe_csv(std::span<const SliceResult> slices) {
  std::ostringstream out;
  out << "representation,subset,train_size,test_size,auroc,accuracy,note\n";
  for (const auto& s : slices) {
    out << s.representation << ',' << s.subset << ',' << s.train_size << ',' << s.test_size << ','
        << (s.auroc ? fmt4(*s.auroc) : "") << ',' << (s.accuracy.defined() ? s.accuracy.fixed(4) : "") << ','
        << s.note << '\n';
  }
  return out.str();
}

}  // namespace aigt::diagnostics
