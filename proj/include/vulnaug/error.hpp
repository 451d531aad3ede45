#pragma once

#include <stdexcept>
#include <string>

namespace vulnaug {

/// Error categories. The numeric values double as the CLI exit codes.
enum class ErrorKind : int {
  usage = 1,    ///< invalid argument or configuration value
  data = 2,     ///< malformed or inconsistent dataset / input file
  internal = 3  ///< I/O failure or broken internal invariant
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_usage(const std::string& msg) { throw Error(ErrorKind::usage, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void throw_internal(const std::string& msg) { throw Error(ErrorKind::internal, msg); }

}  // namespace vulnaug
