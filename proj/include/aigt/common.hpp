#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aigt {

/// Gold or predicted authorship. AI is the positive class everywhere.
enum class Authorship { Human, Ai };

std::string_view to_string(Authorship a);

/// Accepts "AI"/"HUMAN" in any case, with surrounding whitespace.
std::optional<Authorship> parse_authorship(std::string_view s);

/// Shared singularity floor for every ratio-style statistic.
inline constexpr double kEpsilon = 1e-6;

/// Execution policy for the batch kernels. Serial is the reference path.
enum class Exec { Serial, Parallel };

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad flags, bad config, inconsistent inputs. Maps to CLI exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Transport failure after retries were exhausted. Maps to CLI exit code 2.
class NetworkError : public Error {
 public:
  using Error::Error;
};

/// The endpoint answered, but not in the expected shape.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// An exact non-negative fraction. A zero denominator means "undefined";
/// undefined rates are rendered as an em-dash and never silently become 0.
struct Rate {
  std::uint64_t num = 0;
  std::uint64_t den = 0;

  bool defined() const { return den != 0; }
  std::optional<double> value() const;
  /// Decimal rendering with round-half-up, computed in integer arithmetic.
  std::string fixed(int digits) const;

  friend bool operator==(const Rate& a, const Rate& b);
  /// Exact strict comparison of two defined rates (cross multiplication).
  friend bool exact_less(const Rate& a, const Rate& b);
};

std::string trim(std::string_view s);
std::string to_upper_ascii(std::string_view s);
std::string to_lower_ascii(std::string_view s);

}  // namespace aigt
