#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace trajwarp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument failed (dimension mismatch, bad parameter).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A value violates a domain-type invariant, e.g. det(R) != +1.
class InvariantViolation : public Error {
 public:
  InvariantViolation(std::string field, std::string invariant, const std::string& detail)
      : Error(field + ": violates invariant '" + invariant + "' (" + detail + ")"),
        field_(std::move(field)),
        invariant_(std::move(invariant)) {}

  const std::string& field() const { return field_; }
  const std::string& invariant() const { return invariant_; }

 private:
  std::string field_;
  std::string invariant_;
};

/// Malformed on-disk or wire data. Carries the offending field name or byte
/// offset (or both) so callers can report exactly where decoding failed.
class FormatError : public Error {
 public:
  static constexpr std::int64_t kNoOffset = -1;

  FormatError(std::string field, const std::string& detail, std::int64_t offset = kNoOffset)
      : Error(Compose(field, detail, offset)), field_(std::move(field)), offset_(offset) {}

  const std::string& field() const { return field_; }
  std::int64_t offset() const { return offset_; }

 private:
  static std::string Compose(const std::string& field, const std::string& detail,
                             std::int64_t offset) {
    std::string msg = field;
    if (offset != kNoOffset) msg += " at byte offset " + std::to_string(offset);
    return msg + ": " + detail;
  }

  std::string field_;
  std::int64_t offset_;
};

/// Robust estimation could not produce a model.
class EstimationFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace trajwarp
