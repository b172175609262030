#pragma once

#include <stdexcept>
#include <string>

namespace abcf {

// Error taxonomy shared by the library and the CLI exit codes:
//   UsageError  -> bad arguments / config (exit 1)
//   DataError   -> malformed or invalid input data (exit 2)
//   NumericError-> sampler diverged or produced non-finite state (exit 3)
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace abcf
