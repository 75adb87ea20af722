#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aigt/common.hpp"
#include "aigt/json_io.hpp"

namespace aigt::lm {

enum class Capability { Score, Chat, Embed };

std::string_view to_string(Capability c);

struct EndpointConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string model_name;
  Capability capability = Capability::Chat;
  std::chrono::milliseconds timeout{60'000};
  int max_parallel = 4;
  std::string api_key;  // loaded from the environment, never serialized
  int max_attempts = 4;
  std::chrono::milliseconds backoff_initial{500};
  std::chrono::milliseconds backoff_max{8'000};
  std::optional<int> max_tokens;  // chat only

  bool configured() const { return !base_url.empty() && !model_name.empty(); }
  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
  /// Everything except the secret, for manifests and cache keys.
  json public_json() const;
};

struct TokenAlternative {
  std::string token_text;
  double logprob;
};

struct TokenScore {
  std::string token_text;
  double logprob = 0.0;  // natural log, <= 0
  std::vector<TokenAlternative> alternatives;  // sorted by descending logprob
  std::size_t position = 0;
};

struct ScoredText {
  std::string prompt_prefix;
  std::vector<TokenScore> tokens;

  double total_logprob() const;
};

json to_json(const ScoredText& s);
ScoredText scored_text_from_json(const json& j);

// ---------------------------------------------------------------------------
// Cache

/// Content-addressed on-disk store. Each entry is a one-line JSON header
/// followed by the raw response body, stored under <dir>/<aa>/<digest>.
/// Readers share a lock; writers are serialized and publish via rename.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, std::string_view value);

  /// Digest of (endpoint, model, capability, request payload).
  static std::string digest_key(const EndpointConfig& cfg, const json& payload);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path entry_path(const std::string& key) const;

  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
};

// ---------------------------------------------------------------------------
// Transport

struct HttpResponse {
  int status = 0;
  std::string body;
  std::optional<std::chrono::milliseconds> retry_after;
};

/// Thrown by a Transport when no HTTP response was obtained.
class TransportFailure : public Error {
 public:
  using Error::Error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const EndpointConfig& cfg, const std::string& path, const std::string& body) = 0;
};

/// cpp-httplib backed transport. A fresh connection per request keeps the
/// transport safe to share across threads.
std::shared_ptr<Transport> make_http_transport();

// ---------------------------------------------------------------------------
// Client

struct ClientOptions {
  std::shared_ptr<Transport> transport;      // defaults to HTTP
  std::shared_ptr<ResponseCache> cache;      // optional
  std::function<void(std::chrono::milliseconds)> sleeper;  // defaults to sleep_for
};

struct ClientCounters {
  std::uint64_t network_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t retries = 0;
};

/// Blocks while `max_parallel` requests against one endpoint are in flight.
class ParallelGate {
 public:
  explicit ParallelGate(int limit) : limit_(limit) {}
  void acquire();
  void release();

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  int limit_;
  int in_flight_ = 0;
};

class Client {
 public:
  explicit Client(ClientOptions options = {});

  /// One TokenScore per token of `continuation`, scored conditionally on
  /// `prefix`. With an empty prefix the first token carries no logprob on
  /// most servers and is skipped.
  ScoredText score_tokens(const EndpointConfig& cfg, std::string_view prefix, std::string_view continuation,
                          int top_k);

  /// Raw completion text. An empty completion is returned as "".
  std::string chat_complete(const EndpointConfig& cfg, std::string_view system, std::string_view user,
                            double temperature, std::optional<std::uint64_t> seed = std::nullopt);

  /// Embedding vector; its dimension is pinned per model on first call.
  std::vector<double> embed(const EndpointConfig& cfg, std::string_view text);

  ClientCounters counters() const;

  /// Backoff schedule used for attempt k (0-based) after a failed attempt,
  /// given the previous delay. Nondecreasing by construction.
  static std::chrono::milliseconds backoff_delay(const EndpointConfig& cfg, int attempt,
                                                 std::chrono::milliseconds previous,
                                                 std::optional<std::chrono::milliseconds> retry_after);

 private:
  /// POSTs `payload` to `path` with caching, retry, and the parallel gate.
  std::string request(const EndpointConfig& cfg, const std::string& path, const json& payload);
  ParallelGate& gate_for(const EndpointConfig& cfg);

  ClientOptions options_;
  std::mutex gates_mutex_;
  std::map<std::string, std::unique_ptr<ParallelGate>> gates_;
  std::mutex dims_mutex_;
  std::map<std::string, std::size_t> embed_dims_;
  std::atomic<std::uint64_t> network_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> retries_{0};
};

/// Parses an OpenAI-style legacy completions response (echo + logprobs) into
/// the tokens that belong to `continuation`.
ScoredText parse_score_response(const std::string& body, std::string_view prefix, std::string_view continuation);
std::string parse_chat_response(const std::string& body);
std::vector<double> parse_embed_response(const std::string& body);

/// Runs fn(i) for i in [0, n) on at most `workers` threads. Exceptions are
/// captured per index and returned; the callable is responsible for its own
/// result storage.
std::vector<std::exception_ptr> run_bounded(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace aigt::lm
