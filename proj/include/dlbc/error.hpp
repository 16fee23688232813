#ifndef DLBC_ERROR_HPP_
#define DLBC_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dlbc {

// Raised when a caller violates an operation's precondition (bad shapes,
// out-of-range indices, malformed partitions).
class ContractViolation : public std::invalid_argument {
 public:
  explicit ContractViolation(const std::string& what)
      : std::invalid_argument(what) {}
};

// Raised when training produces a non-finite loss or metric.
class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what)
      : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace dlbc

#endif  // DLBC_ERROR_HPP_
