#include "aigt/json_io.hpp"

#include <fstream>
#include <sstream>

#include "aigt/common.hpp"

namespace aigt {

void read_jsonl(const std::filesystem::path& path,
                const std::function<void(std::size_t, const json&)>& on_record,
                const std::function<void(std::size_t, const std::string&)>& on_error) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      on_error(line_no, e.what());
      continue;
    }
    on_record(line_no, rec);
  }
}

std::vector<json> read_jsonl_strict(const std::filesystem::path& path) {
  std::vector<json> out;
  read_jsonl(
      path, [&](std::size_t, const json& j) { out.push_back(j); },
      [&](std::size_t line, const std::string& msg) {
        throw ConfigError(path.string() + ":" + std::to_string(line) + ": " + msg);
      });
  return out;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
  std::string buf;
  for (const auto& r : records) {
    buf += r.dump();
    buf += '\n';
  }
  write_text_atomic(path, buf);
}

void write_json(const std::filesystem::path& path, const json& value) { write_text_atomic(path, value.dump(2) + "\n"); }

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

json rate_json(const Rate& r) {
  json j{{"num", r.num}, {"den", r.den}, {"fixed3", r.fixed(3)}};
  if (auto v = r.value()) j["value"] = *v;
  else j["value"] = nullptr;
  return j;
}

}  // namespace aigt
