#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace memalign {

/// Bad argument to a library call: wrong dimension, non-finite value, zero norm.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Configuration rejected before a run starts. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Malformed snapshot bytes. `offset()` is the byte position where decoding failed.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t offset, const std::string& message)
      : std::runtime_error("byte " + std::to_string(offset) + ": " + message),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Retrieval asked for a category whose memory slot is empty.
class NoPositiveAvailable : public std::runtime_error {
 public:
  explicit NoPositiveAvailable(int category)
      : std::runtime_error("memory slot for category " + std::to_string(category) +
                           " is empty"),
        category_(category) {}

  int category() const noexcept { return category_; }

 private:
  int category_;
};

/// A loss term evaluated to NaN/Inf during training.
class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace memalign
