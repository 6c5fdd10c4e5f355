#pragma once

#include <stdexcept>
#include <string>

namespace dnh {

// Every failure the library reports falls into one of these buckets. The CLI
// maps them onto process exit codes (config -> 2, numeric -> 3, others -> 1).
enum class ErrorKind {
  shape,              // mismatched dimensions
  invalid_argument,   // bad parameter value (negative variance, step size, ...)
  numeric,            // NaN/Inf produced, divergence, domain violation
  capacity,           // structural limit hit (level cap, level floor)
  invalid_state,      // object not in a usable state (empty hierarchy, ...)
  config,             // config file malformed / unknown keys / bad values
  end_of_stream,      // stream drained
  insufficient_data,  // metric needs more points than were given
  range,              // index or step out of range
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace dnh
