#pragma once

#include <stdexcept>
#include <string>

namespace hmof {

// Input data is missing, undecodable, or inconsistent (dimensions, counts).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A persisted model is missing, truncated, or has an unexpected layout.
class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& what) : std::runtime_error(what) {}
};

// Unknown key, malformed value, or otherwise unusable configuration.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace hmof
