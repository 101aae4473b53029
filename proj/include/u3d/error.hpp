#pragma once

#include <stdexcept>
#include <string>

namespace u3d {

// Bad arguments or violated preconditions (CLI exit code 2).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed U3DT data.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { BadMagic, BadHeader, Truncated, DimOverflow, NonFinite };

  FormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// Wire protocol violations, timeouts and peer exits (CLI exit code 3).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem and stream failures (CLI exit code 4).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by the hybrid objective once the query budget cannot cover another
// round of oracle queries.
class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace u3d
