#pragma once

#include <stdexcept>
#include <string>

namespace pogmdm {

/// Raised when an iterate or loss stops being finite.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pogmdm
