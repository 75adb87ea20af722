#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "aigt/json_io.hpp"

namespace aigt {

struct InputRef {
  std::string role;
  std::filesystem::path path;
  std::string sha256;
};

/// Identity of one CLI run. The digest covers the subcommand, the effective
/// configuration, the parameters and the content of every input, but not
/// paths, so a run is named by what it computes from.
struct RunManifest {
  std::string subcommand;
  json config = json::object();
  json parameters = json::object();
  std::vector<InputRef> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::string created_at;

  std::string digest() const;
  std::string short_digest() const { return digest().substr(0, 12); }
  json to_json() const;
};

/// Output directory <root>/<subcommand>-<digest12>. Artifacts are written
/// through it so each one is listed in manifest.json; JSON artifacts carry a
/// "manifest" reference and markdown ones a footer line.
class RunDir {
 public:
  RunDir(const std::filesystem::path& root, RunManifest manifest);

  const std::filesystem::path& path() const { return dir_; }
  const RunManifest& manifest() const { return manifest_; }

  void write_json(const std::string& name, json value);
  void write_jsonl(const std::string& name, const std::vector<json>& records);
  void write_text(const std::string& name, const std::string& content);
  void write_markdown(const std::string& name, const std::string& content);

  /// Writes manifest.json. The creation time of an earlier run with the same
  /// digest is kept, so identical re-runs reproduce every byte.
  void finish();

 private:
  void track(const std::string& name);
  json reference() const;

  std::filesystem::path dir_;
  RunManifest manifest_;
};

/// UTC timestamp, or SOURCE_DATE_EPOCH when that is set.
std::string utc_timestamp();

}  // namespace aigt
