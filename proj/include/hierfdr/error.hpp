#pragma once

#include <stdexcept>
#include <string>

namespace hierfdr {

enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Parse = 3,
  DimensionMismatch = 4,
  NonConvergence = 5,
  Infeasible = 6,
  Internal = 7,
};

/// Base exception for every failure raised by the library. The code maps
/// one-to-one onto the status values of the C interface.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace hierfdr
