#pragma once

#include <stdexcept>

namespace bitattn {

// Dimension or layout mismatch between operands.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Input value outside an operation's domain (non-finite, out of range, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Stream or file failure, malformed serialized data.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bitattn
