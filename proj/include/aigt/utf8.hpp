#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace aigt::utf8 {

/// One decoded code point and the bytes it occupies in the source string.
/// Invalid bytes decode as U+FFFD with length 1 so that untouched spans can
/// be copied back byte-exactly.
struct CodepointSpan {
  char32_t cp;
  std::size_t offset;
  std::size_t length;
  bool valid;
};

std::vector<CodepointSpan> decode(std::string_view s);
std::string encode(char32_t cp);
void append(std::string& out, char32_t cp);
bool is_valid(std::string_view s);

}  // namespace aigt::utf8
