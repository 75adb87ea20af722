#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "aigt/json_io.hpp"
#include "aigt/lmclient.hpp"
#include "aigt/trainmath.hpp"

namespace aigt {

/// Endpoint roles and the capability each one needs.
inline constexpr std::pair<std::string_view, lm::Capability> kEndpointRoles[] = {
    {"score", lm::Capability::Score},    {"performer", lm::Capability::Score}, {"chat", lm::Capability::Chat},
    {"judge", lm::Capability::Chat},     {"embed", lm::Capability::Embed},
};

struct RunConfig {
  std::map<std::string, lm::EndpointConfig> endpoints;  // every role present, possibly unconfigured
  std::filesystem::path cache_dir = ".aigt-cache";
  std::filesystem::path out_dir = "runs";
  std::uint64_t seed = 0;
  int top_k = 20;
  double teacher_temperature = 0.0;
  trainmath::RewardSpec reward;
  std::vector<std::size_t> length_edges{150, 300, 450, 600};

  RunConfig();

  /// The role's endpoint; throws ConfigError naming the missing settings
  /// when it is not configured.
  const lm::EndpointConfig& endpoint(std::string_view role) const;
  lm::EndpointConfig& mutable_endpoint(std::string_view role);

  /// Everything that changes results. Secrets, cache and output locations
  /// are left out.
  json public_json() const;
};

/// Merges a JSON config file over the defaults. API keys are read from the
/// environment variable named by each endpoint's api_key_env.
RunConfig config_from_json(const json& j);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace aigt
