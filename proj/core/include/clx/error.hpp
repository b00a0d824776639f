#pragma once

#include <stdexcept>
#include <string>

namespace clx {

// Invalid configuration supplied by a caller (bad field values, inconsistent
// dimensions, out-of-range parameters). Raised before any work starts.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Arguments that are individually valid but mutually inconsistent (length
// field not matching a payload, optional field present under wrong flags).
class ConsistencyError : public std::runtime_error {
 public:
  explicit ConsistencyError(const std::string& what)
      : std::runtime_error(what) {}
};

// Input whose size violates a documented precondition (window shorter than
// the model's receptive length, truncated tensor payload, ...).
class InputSizeError : public std::runtime_error {
 public:
  explicit InputSizeError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure during optimization (non-finite loss or gradient).
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem or serialization failure (unreadable file, bad magic, short read).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace clx
