#pragma once

#include <stdexcept>
#include <string>

namespace aag {

// Shape disagreement between tensors or between a tensor and an op contract.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Bad scalar argument (non-positive temperature, batch size below 2, ...).
class ValueError : public std::invalid_argument {
 public:
  explicit ValueError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Malformed or inconsistent configuration (unknown keys, unknown ops, ...).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// File-level failures; message carries the file name and offset where known.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Structurally valid file with impossible content (e.g. label byte out of range).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace aag
