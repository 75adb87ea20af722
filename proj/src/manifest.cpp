#include "aigt/manifest.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>

#include "aigt/common.hpp"
#include "aigt/digest.hpp"

namespace aigt {

std::string utc_timestamp() {
  std::time_t t = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    t = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string RunManifest::digest() const {
  json inputs_json = json::array();
  for (const auto& in : inputs) inputs_json.push_back({{"role", in.role}, {"sha256", in.sha256}});
  const json identity{{"subcommand", subcommand},
                      {"config", config},
                      {"parameters", parameters},
                      {"inputs", inputs_json},
                      {"seed", seed}};
  return sha256_hex(identity.dump());
}

json RunManifest::to_json() const {
  json inputs_json = json::array();
  for (const auto& in : inputs) {
    inputs_json.push_back({{"role", in.role}, {"path", in.path.string()}, {"sha256", in.sha256}});
  }
  return json{{"subcommand", subcommand}, {"digest", digest()},      {"config", config},
              {"parameters", parameters}, {"inputs", inputs_json},   {"outputs", outputs},
              {"seed", seed},             {"created_at", created_at}};
}

RunDir::RunDir(const std::filesystem::path& root, RunManifest manifest) : manifest_(std::move(manifest)) {
  dir_ = root / (manifest_.subcommand + "-" + manifest_.short_digest());
  std::filesystem::create_directories(dir_);
}

void RunDir::track(const std::string& name) {
  if (std::find(manifest_.outputs.begin(), manifest_.outputs.end(), name) == manifest_.outputs.end()) {
    manifest_.outputs.push_back(name);
  }
}

json RunDir::reference() const { return json{{"file", "manifest.json"}, {"digest", manifest_.digest()}}; }

void RunDir::write_json(const std::string& name, json value) {
  if (value.is_object()) value["manifest"] = reference();
  std::filesystem::create_directories((dir_ / name).parent_path());
  aigt::write_json(dir_ / name, value);
  track(name);
}

void RunDir::write_jsonl(const std::string& name, const std::vector<json>& records) {
  aigt::write_jsonl(dir_ / name, records);
  track(name);
}

void RunDir::write_text(const std::string& name, const std::string& content) {
  std::filesystem::create_directories((dir_ / name).parent_path());
  write_text_atomic(dir_ / name, content);
  track(name);
}

void RunDir::write_markdown(const std::string& name, const std::string& content) {
  write_text(name, content + "\n_Run manifest: manifest.json, digest " + manifest_.short_digest() + "_\n");
}

void RunDir::finish() {
  const auto path = dir_ / "manifest.json";
  manifest_.created_at.clear();
  if (std::filesystem::exists(path)) {
    try {
      const auto old = read_json(path);
      if (old.value("digest", "") == manifest_.digest()) manifest_.created_at = old.value("created_at", "");
    } catch (const std::exception&) {
      // unreadable manifest: treat as a fresh run
    }
  }
  if (manifest_.created_at.empty()) manifest_.created_at = utc_timestamp();
  std::sort(manifest_.outputs.begin(), manifest_.outputs.end());
  aigt::write_json(path, manifest_.to_json());
}

}  // namespace aigt
