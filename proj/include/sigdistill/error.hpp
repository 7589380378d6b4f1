#pragma once

#include <stdexcept>
#include <string>

namespace sigdistill {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or invariant violated by caller-supplied data.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File system failures while reading or writing artifacts.
class PersistenceError : public Error {
 public:
  using Error::Error;
};

// A forward op produced NaN/Inf, or an optimization loop diverged.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  enum class Kind {
    bad_magic,
    unsupported_version,
    bad_channel_count,
    truncated_header,
    bad_class_table,
    truncated_payload,
    non_finite_sample,
    label_out_of_range,
    trailing_bytes,
    config,
  };

  ParseError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace sigdistill
