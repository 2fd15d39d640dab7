#pragma once

#include <stdexcept>
#include <string>

namespace apc {

// Raised when a caller breaks a documented precondition.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// The biased Hankel matrix was not positive semidefinite, even after the retry
// with a stronger moment bias. Carries the pixel when raised from a render pass.
class NumericDegeneracyError : public std::runtime_error {
 public:
  explicit NumericDegeneracyError(const std::string& what, int px = -1, int py = -1, int rank = -1)
      : std::runtime_error(what), pixel_x(px), pixel_y(py), rank_id(rank) {}

  int pixel_x;
  int pixel_y;
  int rank_id;
};

// Segments whose depth order cannot be established.
class OrderingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace apc
