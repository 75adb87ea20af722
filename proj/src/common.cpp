#include "aigt/common.hpp"

#include <algorithm>
#include <cctype>

namespace aigt {

std::string_view to_string(Authorship a) { return a == Authorship::Ai ? "AI" : "HUMAN"; }

std::optional<Authorship> parse_authorship(std::string_view s) {
  const std::string up = to_upper_ascii(trim(s));
  if (up == "AI") return Authorship::Ai;
  if (up == "HUMAN") return Authorship::Human;
  return std::nullopt;
}

std::optional<double> Rate::value() const {
  if (!defined()) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string Rate::fixed(int digits) const {
  if (!defined()) return "—";
  unsigned __int128 scale = 1;
  for (int i = 0; i < digits; ++i) scale *= 10;
  // round(num * scale / den), half up
  const unsigned __int128 scaled = (static_cast<unsigned __int128>(num) * scale * 2 + den) / (2 * static_cast<unsigned __int128>(den));
  const auto whole = static_cast<std::uint64_t>(scaled / scale);
  auto frac = static_cast<std::uint64_t>(scaled % scale);
  std::string out = std::to_string(whole);
  if (digits > 0) {
    std::string f = std::to_string(frac);
    out += '.';
    out += std::string(static_cast<std::size_t>(digits) - f.size(), '0');
    out += f;
  }
  return out;
}

bool operator==(const Rate& a, const Rate& b) {
  if (!a.defined() || !b.defined()) return a.defined() == b.defined();
  return static_cast<unsigned __int128>(a.num) * b.den == static_cast<unsigned __int128>(b.num) * a.den;
}

bool exact_less(const Rate& a, const Rate& b) {
  return static_cast<unsigned __int128>(a.num) * b.den < static_cast<unsigned __int128>(b.num) * a.den;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_upper_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return out;
}

std::string to_lower_ascii(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace aigt
