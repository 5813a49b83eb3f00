#pragma once

#include <stdexcept>
#include <string>

namespace mrn {

// Raised when a caller breaks an operation's precondition (shape or channel
// mismatch, non-scalar loss, malformed mask).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Raised for malformed files, unknown config keys and similar I/O problems.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace mrn
