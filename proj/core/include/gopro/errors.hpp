#pragma once

#include <stdexcept>
#include <string>

namespace gopro {

// Bad configuration: unknown keys, invalid values, shape/width mismatches
// that trace back to how the run was configured. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent dataset inputs (manifests, images, splits).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A protocol invariant was violated at runtime (label leakage, label
// outside the seen set, checkpoint/protocol mismatch).
class ProtocolError : public std::runtime_error {
 public:
  explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical degeneracy: NaN/Inf losses, zero-norm embeddings, undefined
// statistics. Always a hard error, never silently patched.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gopro
