#pragma once

#include <stdexcept>
#include <string>

namespace bvrvi {

// Point outside the domain of a mirror map or divergence.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Invalid algorithm or operation parameter (non-positive step, empty batch...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Block structure of two vectors does not match.
class LayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A theorem premise does not hold. The message names the violated inequality.
class PremiseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation is not supported for this geometry or operator.
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bvrvi
