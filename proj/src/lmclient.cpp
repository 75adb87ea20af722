#include "aigt/lmclient.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "aigt/digest.hpp"

namespace aigt::lm {

std::string_view to_string(Capability c) {
  switch (c) {
    case Capability::Score:
      return "score";
    case Capability::Embed:
      return "embed";
    case Capability::Chat:
      break;
  }
  return "chat";
}

void EndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigError(std::string(to_string(capability)) + " endpoint: base_url is not set");
  if (model_name.empty()) throw ConfigError(std::string(to_string(capability)) + " endpoint: model is not set");
  if (max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
  if (timeout.count() <= 0) throw ConfigError("timeout must be > 0");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
}

json EndpointConfig::public_json() const {
  json j;
  j["base_url"] = base_url;
  j["model"] = model_name;
  j["capability"] = std::string(to_string(capability));
  j["timeout_ms"] = timeout.count();
  j["max_parallel"] = max_parallel;
  j["max_attempts"] = max_attempts;
  if (max_tokens) j["max_tokens"] = *max_tokens;
  return j;
}

double ScoredText::total_logprob() const {
  double s = 0.0;
  for (const auto& t : tokens) s += t.logprob;
  return s;
}

json to_json(const ScoredText& s) {
  json toks = json::array();
  for (const auto& t : s.tokens) {
    json alts = json::array();
    for (const auto& a : t.alternatives) alts.push_back({a.token_text, a.logprob});
    toks.push_back({{"token", t.token_text}, {"logprob", t.logprob}, {"position", t.position}, {"alternatives", alts}});
  }
  return {{"prefix", s.prompt_prefix}, {"tokens", toks}};
}

ScoredText scored_text_from_json(const json& j) {
  ScoredText s;
  s.prompt_prefix = j.value("prefix", "");
  for (const auto& t : j.at("tokens")) {
    TokenScore ts;
    ts.token_text = t.at("token").get<std::string>();
    ts.logprob = t.at("logprob").get<double>();
    ts.position = t.at("position").get<std::size_t>();
    for (const auto& a : t.at("alternatives")) ts.alternatives.push_back({a.at(0).get<std::string>(), a.at(1).get<double>()});
    s.tokens.push_back(std::move(ts));
  }
  return s;
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::entry_path(const std::string& key) const {
  return dir_ / key.substr(0, 2) / key;
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  std::shared_lock lock(mutex_);
  std::ifstream in(entry_path(key), std::ios::binary);
  if (!in) return std::nullopt;
  std::string header;
  if (!std::getline(in, header)) return std::nullopt;
  json h;
  try {
    h = json::parse(header);
  } catch (const json::parse_error&) {
    spdlog::warn("cache: corrupt header for {}", key);
    return std::nullopt;
  }
  if (h.value("key", "") != key) return std::nullopt;
  const auto size = h.value("size", std::size_t{0});
  std::string value(size, '\0');
  in.read(value.data(), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size) return std::nullopt;
  return value;
}

void ResponseCache::put(const std::string& key, std::string_view value) {
  std::unique_lock lock(mutex_);
  const auto path = entry_path(key);
  std::filesystem::create_directories(path.parent_path());
  const auto now = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch());
  json h{{"key", key}, {"created_at", now.count()}, {"size", value.size()}};
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cache: cannot write " + tmp.string());
    out << h.dump() << '\n';
    out.write(value.data(), static_cast<std::streamsize>(value.size()));
  }
  std::filesystem::rename(tmp, path);
}

std::string ResponseCache::digest_key(const EndpointConfig& cfg, const json& payload) {
  const json k{{"endpoint", cfg.base_url},
               {"model", cfg.model_name},
               {"capability", std::string(to_string(cfg.capability))},
               {"payload", payload}};
  return sha256_hex(k.dump());
}

// ---------------------------------------------------------------------------

void ParallelGate::acquire() {
  std::unique_lock lock(mutex_);
  cv_.wait(lock, [&] { return in_flight_ < limit_; });
  ++in_flight_;
}

void ParallelGate::release() {
  {
    std::lock_guard lock(mutex_);
    --in_flight_;
  }
  cv_.notify_one();
}

namespace {

struct GateGuard {
  explicit GateGuard(ParallelGate& g) : gate(g) { gate.acquire(); }
  ~GateGuard() { gate.release(); }
  GateGuard(const GateGuard&) = delete;
  GateGuard& operator=(const GateGuard&) = delete;
  ParallelGate& gate;
};

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("response is not JSON: ") + e.what());
  }
}

const json& require(const json& obj, const char* field, const std::string& where) {
  if (!obj.is_object()) throw ProtocolError("expected object at '" + where + "'");
  auto it = obj.find(field);
  if (it == obj.end()) throw ProtocolError("response missing field '" + where + "." + field + "'");
  return *it;
}

const json& first_choice(const json& j) {
  const auto& choices = require(j, "choices", "$");
  if (!choices.is_array() || choices.empty()) throw ProtocolError("response field 'choices' is empty");
  return choices.front();
}

bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

ScoredText parse_score_response(const std::string& body, std::string_view prefix, std::string_view continuation) {
  const json j = parse_body(body);
  const auto& choice = first_choice(j);
  const auto& lp = require(choice, "logprobs", "choices[0]");
  const auto& tokens = require(lp, "tokens", "choices[0].logprobs");
  const auto& token_logprobs = require(lp, "token_logprobs", "choices[0].logprobs");
  const auto& top = require(lp, "top_logprobs", "choices[0].logprobs");
  if (!tokens.is_array() || !token_logprobs.is_array() || !top.is_array()) {
    throw ProtocolError("logprobs fields must be arrays");
  }
  if (token_logprobs.size() != tokens.size() || top.size() != tokens.size()) {
    throw ProtocolError("logprobs arrays have mismatched lengths");
  }

  const std::size_t prompt_len = prefix.size() + continuation.size();
  ScoredText out;
  out.prompt_prefix = std::string(prefix);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!tokens[i].is_string()) throw ProtocolError("choices[0].logprobs.tokens[" + std::to_string(i) + "] is not a string");
    const auto text = tokens[i].get<std::string>();
    const std::size_t start = offset;
    offset += text.size();
    if (start >= prompt_len) break;  // generated tokens past the prompt
    if (offset <= prefix.size()) continue;  // prefix token

    const auto& lpv = token_logprobs[i];
    if (lpv.is_null()) {
      if (i == 0) continue;  // unconditioned first token
      throw ProtocolError("response field 'token_logprobs[" + std::to_string(i) + "]' is null");
    }
    if (!lpv.is_number()) throw ProtocolError("response field 'token_logprobs[" + std::to_string(i) + "]' is not a number");
    double value = lpv.get<double>();
    if (value > 0.0) {
      if (value > 1e-6) throw ProtocolError("positive logprob at token " + std::to_string(i));
      value = 0.0;
    }
    TokenScore ts;
    ts.token_text = text;
    ts.logprob = value;
    ts.position = out.tokens.size();
    if (top[i].is_object()) {
      for (const auto& [tok, v] : top[i].items()) {
        if (!v.is_number()) throw ProtocolError("non-numeric top_logprobs entry at token " + std::to_string(i));
        ts.alternatives.push_back({tok, std::min(0.0, v.get<double>())});
      }
    } else if (!top[i].is_null()) {
      throw ProtocolError("response field 'top_logprobs[" + std::to_string(i) + "]' is not an object");
    }
    std::sort(ts.alternatives.begin(), ts.alternatives.end(), [](const auto& a, const auto& b) {
      return a.logprob != b.logprob ? a.logprob > b.logprob : a.token_text < b.token_text;
    });
    if (!ts.alternatives.empty() && ts.logprob > ts.alternatives.front().logprob + 1e-6) {
      throw ProtocolError("observed token more likely than top alternative at token " + std::to_string(i));
    }
    out.tokens.push_back(std::move(ts));
  }
  return out;
}

std::string parse_chat_response(const std::string& body) {
  const json j = parse_body(body);
  const auto& choice = first_choice(j);
  const auto& msg = require(choice, "message", "choices[0]");
  const auto& content = require(msg, "content", "choices[0].message");
  if (content.is_null()) return {};
  if (!content.is_string()) throw ProtocolError("choices[0].message.content is not a string");
  return content.get<std::string>();
}

std::vector<double> parse_embed_response(const std::string& body) {
  const json j = parse_body(body);
  const auto& data = require(j, "data", "$");
  if (!data.is_array() || data.empty()) throw ProtocolError("response field 'data' is empty");
  const auto& emb = require(data.front(), "embedding", "data[0]");
  if (!emb.is_array() || emb.empty()) throw ProtocolError("data[0].embedding must be a non-empty array");
  std::vector<double> v;
  v.reserve(emb.size());
  for (const auto& x : emb) {
    if (!x.is_number()) throw ProtocolError("data[0].embedding contains a non-number");
    v.push_back(x.get<double>());
  }
  return v;
}

// ---------------------------------------------------------------------------

Client::Client(ClientOptions options) : options_(std::move(options)) {
  if (!options_.transport) options_.transport = make_http_transport();
  if (!options_.sleeper) options_.sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ClientCounters Client::counters() const { return {network_calls_.load(), cache_hits_.load(), retries_.load()}; }

ParallelGate& Client::gate_for(const EndpointConfig& cfg) {
  std::lock_guard lock(gates_mutex_);
  auto& g = gates_[cfg.base_url + "|" + cfg.model_name];
  if (!g) g = std::make_unique<ParallelGate>(cfg.max_parallel);
  return *g;
}

std::chrono::milliseconds Client::backoff_delay(const EndpointConfig& cfg, int attempt,
                                                std::chrono::milliseconds previous,
                                                std::optional<std::chrono::milliseconds> retry_after) {
  auto d = cfg.backoff_initial;
  for (int i = 0; i < attempt && d < cfg.backoff_max; ++i) d *= 2;
  d = std::min(d, cfg.backoff_max);
  if (retry_after) d = std::max(d, *retry_after);
  return std::max(d, previous);
}

std::string Client::request(const EndpointConfig& cfg, const std::string& path, const json& payload) {
  cfg.validate();
  std::string key;
  if (options_.cache) {
    key = ResponseCache::digest_key(cfg, payload);
    if (auto hit = options_.cache->get(key)) {
      ++cache_hits_;
      return *hit;
    }
  }
  const std::string body = payload.dump();
  spdlog::debug("POST {}{} model={} auth={} payload={}", cfg.base_url, path, cfg.model_name,
                cfg.api_key.empty() ? "none" : "<redacted>", body);

  GateGuard guard(gate_for(cfg));
  std::chrono::milliseconds delay{0};
  std::string last_error;
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    std::optional<std::chrono::milliseconds> retry_after;
    try {
      ++network_calls_;
      HttpResponse res = options_.transport->post(cfg, path, body);
      spdlog::debug("POST {}{} -> {} ({} bytes)", cfg.base_url, path, res.status, res.body.size());
      if (res.status == 200) {
        return res.body;
      }
      if (!retryable_status(res.status)) {
        throw ProtocolError("HTTP " + std::to_string(res.status) + " from " + cfg.base_url + path + ": " +
                            res.body.substr(0, 200));
      }
      last_error = "HTTP " + std::to_string(res.status);
      retry_after = res.retry_after;
    } catch (const TransportFailure& e) {
      last_error = e.what();
    }
    if (attempt + 1 < cfg.max_attempts) {
      delay = backoff_delay(cfg, attempt, delay, retry_after);
      ++retries_;
      spdlog::debug("retrying {}{} in {} ms after: {}", cfg.base_url, path, delay.count(), last_error);
      options_.sleeper(delay);
    }
  }
  throw NetworkError(cfg.base_url + path + " failed after " + std::to_string(cfg.max_attempts) +
                     " attempts: " + last_error);
}

ScoredText Client::score_tokens(const EndpointConfig& cfg, std::string_view prefix, std::string_view continuation,
                                int top_k) {
  if (cfg.capability != Capability::Score) throw ConfigError("score_tokens requires a score endpoint");
  if (top_k < 1) throw PreconditionError("top_k must be >= 1");
  if (continuation.empty()) throw PreconditionError("cannot score an empty continuation");
  const json payload{{"model", cfg.model_name},
                     {"prompt", std::string(prefix) + std::string(continuation)},
                     {"max_tokens", 0},
                     {"echo", true},
                     {"logprobs", top_k},
                     {"temperature", 0}};
  const auto body = request(cfg, "/completions", payload);
  auto out = parse_score_response(body, prefix, continuation);
  if (options_.cache) options_.cache->put(ResponseCache::digest_key(cfg, payload), body);
  return out;
}

std::string Client::chat_complete(const EndpointConfig& cfg, std::string_view system, std::string_view user,
                                  double temperature, std::optional<std::uint64_t> seed) {
  if (cfg.capability != Capability::Chat) throw ConfigError("chat_complete requires a chat endpoint");
  if (temperature < 0.0) throw PreconditionError("temperature must be >= 0");
  json messages = json::array();
  if (!system.empty()) messages.push_back({{"role", "system"}, {"content", std::string(system)}});
  messages.push_back({{"role", "user"}, {"content", std::string(user)}});
  json payload{{"model", cfg.model_name}, {"messages", messages}, {"temperature", temperature}};
  if (seed) payload["seed"] = *seed;
  if (cfg.max_tokens) payload["max_tokens"] = *cfg.max_tokens;
  const auto body = request(cfg, "/chat/completions", payload);
  auto out = parse_chat_response(body);
  if (options_.cache) options_.cache->put(ResponseCache::digest_key(cfg, payload), body);
  return out;
}

std::vector<double> Client::embed(const EndpointConfig& cfg, std::string_view text) {
  if (cfg.capability != Capability::Embed) throw ConfigError("embed requires an embed endpoint");
  if (text.empty()) throw PreconditionError("cannot embed empty text");
  const json payload{{"model", cfg.model_name}, {"input", std::string(text)}};
  const auto body = request(cfg, "/embeddings", payload);
  auto v = parse_embed_response(body);
  {
    std::lock_guard lock(dims_mutex_);
    const auto key = cfg.base_url + "|" + cfg.model_name;
    auto [it, inserted] = embed_dims_.emplace(key, v.size());
    if (!inserted && it->second != v.size()) {
      throw ProtocolError("embedding dimension changed from " + std::to_string(it->second) + " to " +
                          std::to_string(v.size()) + " for model " + cfg.model_name);
    }
  }
  if (options_.cache) options_.cache->put(ResponseCache::digest_key(cfg, payload), body);
  return v;
}

std::vector<std::exception_ptr> run_bounded(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  if (n == 0) return errors;
  const auto count = static_cast<std::size_t>(std::clamp<long long>(workers, 1, static_cast<long long>(n)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(count - 1);
    for (std::size_t t = 1; t < count; ++t) pool.emplace_back(work);
    work();
  }
  return errors;
}

}  // namespace aigt::lm
