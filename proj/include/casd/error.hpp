#pragma once

#include <stdexcept>
#include <string>

namespace casd {

enum class ErrorKind {
  kUsage,      // bad flags, unknown condition names
  kConfig,     // invalid configuration values or keys
  kData,       // ingestion / dataset problems
  kNumeric,    // non-finite values, divergence, gradcheck breach
  kDimension,  // shape mismatches
  kDomain,     // arguments outside a function's domain
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

// Process exit status for a failure of the given kind.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kData:
    case ErrorKind::kDimension:
      return 3;
    case ErrorKind::kNumeric:
    case ErrorKind::kDomain:
      return 4;
    case ErrorKind::kIo:
      return 1;
  }
  return 1;
}

}  // namespace casd
