#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aigt/common.hpp"

namespace aigt {

using json = nlohmann::json;

/// Calls `on_record(line_number, record)` for each non-blank line; lines that
/// are not valid JSON go to `on_error(line_number, message)`.
/// Throws Error if the file cannot be opened.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(std::size_t, const json&)>& on_record,
                const std::function<void(std::size_t, const std::string&)>& on_error);

std::vector<json> read_jsonl_strict(const std::filesystem::path& path);

/// Writes via a temp file and rename so readers never see a partial file.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records);
void write_json(const std::filesystem::path& path, const json& value);
json read_json(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

/// {num, den, value, fixed3}; value is null when the rate is undefined.
json rate_json(const Rate& r);

}  // namespace aigt
