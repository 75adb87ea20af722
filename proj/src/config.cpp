#include "aigt/config.hpp"

#include <cstdlib>

namespace aigt {

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

void merge_endpoint(lm::EndpointConfig& e, const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  static const char* known[] = {"base_url",      "model",          "timeout_ms",     "max_parallel", "api_key_env",
                                "max_attempts",  "backoff_initial_ms", "backoff_max_ms", "max_tokens"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(std::begin(known), std::end(known), k) == std::end(known)) {
      throw ConfigError("unknown key " + where + "." + k);
    }
  }
  e.base_url = get_or<std::string>(j, "base_url", e.base_url, where);
  e.model_name = get_or<std::string>(j, "model", e.model_name, where);
  e.timeout = std::chrono::milliseconds(get_or<long long>(j, "timeout_ms", e.timeout.count(), where));
  e.max_parallel = get_or<int>(j, "max_parallel", e.max_parallel, where);
  e.max_attempts = get_or<int>(j, "max_attempts", e.max_attempts, where);
  e.backoff_initial = std::chrono::milliseconds(get_or<long long>(j, "backoff_initial_ms", e.backoff_initial.count(), where));
  e.backoff_max = std::chrono::milliseconds(get_or<long long>(j, "backoff_max_ms", e.backoff_max.count(), where));
  if (j.contains("max_tokens")) e.max_tokens = get_or<int>(j, "max_tokens", 0, where);
  if (auto env = get_or<std::string>(j, "api_key_env", "", where); !env.empty()) {
    const char* v = std::getenv(env.c_str());
    e.api_key = v ? v : "";
  }
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [role, cap] : kEndpointRoles) {
    lm::EndpointConfig e;
    e.capability = cap;
    endpoints.emplace(std::string(role), e);
  }
}

const lm::EndpointConfig& RunConfig::endpoint(std::string_view role) const {
  auto it = endpoints.find(std::string(role));
  if (it == endpoints.end()) throw ConfigError("unknown endpoint role '" + std::string(role) + "'");
  const auto& e = it->second;
  if (!e.configured()) {
    const std::string r(role);
    throw ConfigError(r + " endpoint is not configured: set endpoints." + r + ".base_url and endpoints." + r +
                      ".model in the config file, or pass --" + r + "-url and --" + r + "-model");
  }
  e.validate();
  return e;
}

lm::EndpointConfig& RunConfig::mutable_endpoint(std::string_view role) {
  auto it = endpoints.find(std::string(role));
  if (it == endpoints.end()) throw ConfigError("unknown endpoint role '" + std::string(role) + "'");
  return it->second;
}

json RunConfig::public_json() const {
  json eps = json::object();
  for (const auto& [role, e] : endpoints) {
    if (e.configured()) eps[role] = e.public_json();
  }
  return json{{"endpoints", eps},
              {"seed", seed},
              {"top_k", top_k},
              {"teacher_temperature", teacher_temperature},
              {"reward", reward.to_json()},
              {"length_edges", length_edges}};
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const char* known[] = {"endpoints", "cache_dir", "out",    "seed",        "top_k",
                                "teacher_temperature",   "reward", "length_edges"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(std::begin(known), std::end(known), k) == std::end(known)) throw ConfigError("unknown config key '" + k + "'");
  }
  RunConfig c;
  if (auto it = j.find("endpoints"); it != j.end()) {
    if (!it->is_object()) throw ConfigError("endpoints must be an object");
    for (const auto& [role, e] : it->items()) merge_endpoint(c.mutable_endpoint(role), e, "endpoints." + role);
  }
  c.cache_dir = get_or<std::string>(j, "cache_dir", c.cache_dir.string(), "config");
  c.out_dir = get_or<std::string>(j, "out", c.out_dir.string(), "config");
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed, "config");
  c.top_k = get_or<int>(j, "top_k", c.top_k, "config");
  c.teacher_temperature = get_or<double>(j, "teacher_temperature", c.teacher_temperature, "config");
  if (auto it = j.find("reward"); it != j.end()) {
    c.reward.correct = get_or<double>(*it, "correct", c.reward.correct, "reward");
    c.reward.incorrect = get_or<double>(*it, "incorrect", c.reward.incorrect, "reward");
    c.reward.unparseable = get_or<double>(*it, "unparseable", c.reward.unparseable, "reward");
  }
  c.length_edges = get_or<std::vector<std::size_t>>(j, "length_edges", c.length_edges, "config");
  c.reward.validate();
  if (c.top_k < 1) throw ConfigError("top_k must be >= 1");
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = read_json(path);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace aigt
