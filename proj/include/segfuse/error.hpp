#pragma once

#include <stdexcept>
#include <string>

namespace segfuse {

// Bad parameters or inputs that violate a documented constraint.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Two volumes that were expected to share a voxel grid do not.
class GridMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Filesystem-level failure (missing file, unwritable path, short read).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace segfuse
