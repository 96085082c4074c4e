#pragma once

#include <stdexcept>
#include <string>

namespace tfdm {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape or domain mismatch between tensors / layers.
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error("shape error: " + msg) {}
};

// Bad network description or run options.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error("config error: " + msg) {}
};

// Unreadable or malformed dataset files.
struct DataError : Error {
  explicit DataError(const std::string& msg) : Error("data error: " + msg) {}
};

// Checkpoint file problems. The message starts with one of the distinct
// tags "bad magic", "version mismatch", "truncated", "checksum mismatch",
// "config mismatch" so callers and humans can tell the failure modes apart.
struct CheckpointError : Error {
  explicit CheckpointError(const std::string& msg) : Error("checkpoint error: " + msg) {}
};

// Non-finite values where finite ones are required (exploding training runs,
// NaN inputs to a transform).
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error("numeric error: " + msg) {}
};

}  // namespace tfdm
