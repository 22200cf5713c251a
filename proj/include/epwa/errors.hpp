#pragma once

#include <stdexcept>
#include <string>

namespace epwa {

// Error categories map 1:1 onto process exit codes and C API status values:
// 2 = validation / domain errors, 3 = I/O errors, 4 = numerical failure.
enum class ErrorCode : int { invalid = 2, io = 3, numeric = 4 };

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, std::string msg)
      : std::runtime_error(std::move(msg)), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail_invalid(const std::string& msg) {
  throw Error(ErrorCode::invalid, msg);
}
[[noreturn]] inline void fail_io(const std::string& msg) {
  throw Error(ErrorCode::io, msg);
}
[[noreturn]] inline void fail_numeric(const std::string& msg) {
  throw Error(ErrorCode::numeric, msg);
}

}  // namespace epwa
