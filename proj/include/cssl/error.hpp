#pragma once

#include <stdexcept>
#include <string>

namespace cssl {

// Base type for every error raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A tensor shape violated an operation's shape rule.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on an argument value failed.
class ValueError : public Error {
 public:
  using Error::Error;
};

// A computation produced a non-finite or numerically degenerate value.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A configuration object or file is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A referenced file or key does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// A file exists but its contents do not parse as expected.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A stored digest does not match the recomputed one.
class HashMismatchError : public Error {
 public:
  using Error::Error;
};

// IDX file ingestion failure, tagged with what went wrong.
class IdxError : public FormatError {
 public:
  enum class Kind { kBadMagic, kTruncated, kCountMismatch };

  IdxError(Kind kind, const std::string& msg) : FormatError(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace cssl
