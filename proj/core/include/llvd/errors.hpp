#pragma once

#include <stdexcept>
#include <string>

namespace llvd {

// Tensor extents or layouts do not line up.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// A ModelConfig / TrainConfig field violates its invariant.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// File / stream failures; message carries the path and cause.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Bad argument values that are not shapes (negative sigma, empty sequence, ...).
class ValueError : public std::runtime_error {
 public:
  explicit ValueError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace llvd
