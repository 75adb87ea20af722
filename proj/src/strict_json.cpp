#include "aigt/strict_json.hpp"

#include <charconv>
#include <cstdlib>
#include <set>

#include "aigt/utf8.hpp"

namespace aigt::strict_json {

namespace {

class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  std::variant<Value, ParseError> run() {
    skip_ws();
    Value v;
    if (!parse_value(v)) return *error_;
    skip_ws();
    if (pos_ < s_.size()) {
      const auto rest = s_.substr(pos_);
      const bool has_closer = rest.find_first_of("}]") != std::string_view::npos || rest.front() == ',';
      return ParseError{has_closer ? ErrorKind::ExtraClosing : ErrorKind::Malformed, pos_,
                        "unexpected content after the document closed"};
    }
    return v;
  }

 private:
  bool fail(ErrorKind kind, std::string detail) {
    if (!error_) error_ = ParseError{kind, pos_, std::move(detail)};
    return false;
  }

  bool eof() const { return pos_ >= s_.size(); }

  void skip_ws() {
    while (!eof()) {
      const char c = s_[pos_];
      if (c != ' ' && c != '\t' && c != '\n' && c != '\r') break;
      ++pos_;
    }
  }

  /// After a string closed, the next structural character must be one of
  /// `allowed`; anything else means the closing quote was meant to be literal.
  bool expect_after_string(std::string_view allowed, const char* what) {
    skip_ws();
    if (eof()) return fail(ErrorKind::Incomplete, std::string("input ended, expected ") + what);
    if (allowed.find(s_[pos_]) != std::string_view::npos) return true;
    return fail(ErrorKind::UnescapedQuote, std::string("string closed early: expected ") + what + " but found '" +
                                               std::string(1, s_[pos_]) + "'");
  }

  bool unexpected(const char* expected) {
    if (eof()) return fail(ErrorKind::Incomplete, std::string("input ended, expected ") + expected);
    const char c = s_[pos_];
    if (c == '}' || c == ']') {
      return fail(ErrorKind::ExtraClosing, std::string("unexpected '") + c + "', expected " + expected);
    }
    return fail(ErrorKind::Malformed, std::string("unexpected '") + c + "', expected " + expected);
  }

  bool parse_value(Value& out) {
    skip_ws();
    if (eof()) return fail(ErrorKind::Incomplete, "input ended, expected a value");
    const char c = s_[pos_];
    switch (c) {
      case '{':
        return parse_object(out);
      case '[':
        return parse_array(out);
      case '"': {
        std::string str;
        if (!parse_string(str)) return false;
        out.data = std::move(str);
        return true;
      }
      case 't':
        return parse_literal("true", out, true);
      case 'f':
        return parse_literal("false", out, false);
      case 'n':
        return parse_literal("null", out, nullptr);
      default:
        if (c == '-' || (c >= '0' && c <= '9')) return parse_number(out);
        return unexpected("a value");
    }
  }

  template <class T>
  bool parse_literal(std::string_view word, Value& out, T v) {
    const auto avail = s_.substr(pos_, word.size());
    if (avail == word) {
      pos_ += word.size();
      out.data = v;
      return true;
    }
    if (word.substr(0, avail.size()) == avail && pos_ + avail.size() == s_.size()) {
      return fail(ErrorKind::Incomplete, "input ended inside a literal");
    }
    return fail(ErrorKind::Malformed, "invalid literal");
  }

  bool parse_number(Value& out) {
    const std::size_t start = pos_;
    if (s_[pos_] == '-') ++pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (!eof() && s_[pos_] >= '0' && s_[pos_] <= '9') {
        ++pos_;
        ++n;
      }
      return n;
    };
    if (eof()) return fail(ErrorKind::Incomplete, "input ended inside a number");
    if (s_[pos_] == '0') {
      ++pos_;
    } else if (digits() == 0) {
      return fail(ErrorKind::Malformed, "invalid number");
    }
    if (!eof() && s_[pos_] == '.') {
      ++pos_;
      if (eof()) return fail(ErrorKind::Incomplete, "input ended inside a number");
      if (digits() == 0) return fail(ErrorKind::Malformed, "invalid number fraction");
    }
    if (!eof() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      ++pos_;
      if (!eof() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (eof()) return fail(ErrorKind::Incomplete, "input ended inside a number");
      if (digits() == 0) return fail(ErrorKind::Malformed, "invalid number exponent");
    }
    const std::string text(s_.substr(start, pos_ - start));
    out.data = std::strtod(text.c_str(), nullptr);
    return true;
  }

  bool parse_hex4(unsigned& v) {
    if (pos_ + 4 > s_.size()) {
      pos_ = s_.size();
      return fail(ErrorKind::Incomplete, "input ended inside a \\u escape");
    }
    const auto* b = s_.data() + pos_;
    auto [p, ec] = std::from_chars(b, b + 4, v, 16);
    if (ec != std::errc() || p != b + 4) return fail(ErrorKind::Malformed, "invalid \\u escape");
    pos_ += 4;
    return true;
  }

  bool parse_string(std::string& out) {
    ++pos_;  // opening quote
    while (true) {
      if (eof()) return fail(ErrorKind::Incomplete, "input ended inside a string");
      const auto c = static_cast<unsigned char>(s_[pos_]);
      if (c == '"') {
        ++pos_;
        return true;
      }
      if (c < 0x20) return fail(ErrorKind::Malformed, "unescaped control character in string");
      if (c != '\\') {
        out += static_cast<char>(c);
        ++pos_;
        continue;
      }
      ++pos_;
      if (eof()) return fail(ErrorKind::Incomplete, "input ended inside an escape");
      const char e = s_[pos_++];
      switch (e) {
        case '"':
          out += '"';
          break;
        case '\\':
          out += '\\';
          break;
        case '/':
          out += '/';
          break;
        case 'b':
          out += '\b';
          break;
        case 'f':
          out += '\f';
          break;
        case 'n':
          out += '\n';
          break;
        case 'r':
          out += '\r';
          break;
        case 't':
          out += '\t';
          break;
        case 'u': {
          unsigned hi = 0;
          if (!parse_hex4(hi)) return false;
          char32_t cp = hi;
          if (hi >= 0xD800 && hi <= 0xDBFF) {
            if (pos_ + 2 > s_.size()) {
              pos_ = s_.size();
              return fail(ErrorKind::Incomplete, "input ended inside a surrogate pair");
            }
            if (s_[pos_] != '\\' || s_[pos_ + 1] != 'u') return fail(ErrorKind::Malformed, "unpaired surrogate");
            pos_ += 2;
            unsigned lo = 0;
            if (!parse_hex4(lo)) return false;
            if (lo < 0xDC00 || lo > 0xDFFF) return fail(ErrorKind::Malformed, "invalid low surrogate");
            cp = 0x10000 + ((hi - 0xD800) << 10) + (lo - 0xDC00);
          } else if (hi >= 0xDC00 && hi <= 0xDFFF) {
            return fail(ErrorKind::Malformed, "unpaired surrogate");
          }
          utf8::append(out, cp);
          break;
        }
        default:
          --pos_;
          return fail(ErrorKind::Malformed, std::string("invalid escape '\\") + e + "'");
      }
    }
  }

  bool parse_array(Value& out) {
    ++pos_;
    Array arr;
    skip_ws();
    if (!eof() && s_[pos_] == ']') {
      ++pos_;
      out.data = std::move(arr);
      return true;
    }
    while (true) {
      Value v;
      const bool was_string = !eof() && s_[pos_] == '"';
      if (!parse_value(v)) return false;
      arr.push_back(std::move(v));
      if (was_string) {
        if (!expect_after_string(",]", "',' or ']'")) return false;
      } else {
        skip_ws();
      }
      if (eof()) return fail(ErrorKind::Incomplete, "input ended inside an array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        out.data = std::move(arr);
        return true;
      }
      return unexpected("',' or ']'");
    }
  }

  bool parse_object(Value& out) {
    ++pos_;
    Object obj;
    std::set<std::string> keys;
    skip_ws();
    if (!eof() && s_[pos_] == '}') {
      ++pos_;
      out.data = std::move(obj);
      return true;
    }
    while (true) {
      skip_ws();
      if (eof()) return fail(ErrorKind::Incomplete, "input ended, expected a key");
      if (s_[pos_] != '"') return unexpected("a string key");
      const std::size_t key_pos = pos_;
      std::string key;
      if (!parse_string(key)) return false;
      if (!expect_after_string(":", "':'")) return false;
      ++pos_;
      if (!keys.insert(key).second) {
        pos_ = key_pos;
        return fail(ErrorKind::Malformed, "duplicate key '" + key + "'");
      }
      skip_ws();
      Value v;
      const bool was_string = !eof() && s_[pos_] == '"';
      if (!parse_value(v)) return false;
      obj.emplace_back(std::move(key), std::move(v));
      if (was_string) {
        if (!expect_after_string(",}", "',' or '}'")) return false;
      } else {
        skip_ws();
      }
      if (eof()) return fail(ErrorKind::Incomplete, "input ended inside an object");
      if (s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (s_[pos_] == '}') {
        ++pos_;
        out.data = std::move(obj);
        return true;
      }
      return unexpected("',' or '}'");
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  std::optional<ParseError> error_;
};

}  // namespace

std::variant<Value, ParseError> parse(std::string_view text) { return Parser(text).run(); }

}  // namespace aigt::strict_json
