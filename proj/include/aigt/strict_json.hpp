#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace aigt::strict_json {

/// Why a document failed to parse. The distinctions mirror the failure modes
/// seen in teacher output rather than a generic syntax-error taxonomy.
enum class ErrorKind {
  Incomplete,      // input ended inside a value
  UnescapedQuote,  // a string closed where the grammar cannot continue
  ExtraClosing,    // stray closing symbol, or content after the document closed
  Malformed,       // any other grammar violation
};

struct ParseError {
  ErrorKind kind;
  std::size_t offset;
  std::string detail;
};

struct Value;
using Object = std::vector<std::pair<std::string, Value>>;
using Array = std::vector<Value>;

struct Value {
  std::variant<std::nullptr_t, bool, double, std::string, Array, Object> data;

  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_object() const { return std::holds_alternative<Object>(data); }
  const std::string& as_string() const { return std::get<std::string>(data); }
  const Object& as_object() const { return std::get<Object>(data); }
};

/// RFC 8259 parse of a complete document. Duplicate object keys are
/// rejected as Malformed.
std::variant<Value, ParseError> parse(std::string_view text);

}  // namespace aigt::strict_json
