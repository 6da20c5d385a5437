#pragma once

#include <stdexcept>
#include <string>

namespace omni {

// Exit-code convention shared with the CLI: 2 config, 3 data, 4 numeric.
struct Error : std::runtime_error {
  int exit_code;
  Error(std::string msg, int code) : std::runtime_error(std::move(msg)), exit_code(code) {}
};

struct ConfigError : Error {
  explicit ConfigError(std::string msg) : Error(std::move(msg), 2) {}
};

struct DataError : Error {
  explicit DataError(std::string msg) : Error(std::move(msg), 3) {}
};

struct NumericError : Error {
  explicit NumericError(std::string msg) : Error(std::move(msg), 4) {}
};

// Shape/dimension violations are treated as configuration mistakes.
struct ShapeError : Error {
  explicit ShapeError(std::string msg) : Error(std::move(msg), 2) {}
};

}  // namespace omni
