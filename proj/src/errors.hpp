#pragma once

#include <stdexcept>
#include <string>

namespace mvf {

enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kNotFound = 2,
  kIo = 3,
  kConfig = 4,
  kNumeric = 5,
  kShape = 6,
  kInternal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline Error invalid_argument(const std::string& what) {
  return Error(ErrorCode::kInvalidArgument, what);
}
inline Error shape_error(const std::string& what) { return Error(ErrorCode::kShape, what); }
inline Error io_error(const std::string& what) { return Error(ErrorCode::kIo, what); }
inline Error not_found(const std::string& what) { return Error(ErrorCode::kNotFound, what); }
inline Error config_error(const std::string& what) { return Error(ErrorCode::kConfig, what); }
inline Error numeric_error(const std::string& what) { return Error(ErrorCode::kNumeric, what); }

}  // namespace mvf
