#pragma once

#include <stdexcept>
#include <string>

namespace ordemo {

// Bad input: malformed documents, unknown labels, incompatible modes.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures that happen after inputs were accepted (divergence, I/O).
// The CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ordemo
