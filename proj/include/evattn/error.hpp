#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evattn {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input bytes or text. `position()` is a byte offset for binary
// input and a 1-based line number for text input.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t position)
      : Error(what), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// A value violates a documented precondition (geometry, bounds, sizes).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Bad pipeline configuration. `key()` names the offending field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace evattn
