#pragma once

#include <stdexcept>
#include <string>

namespace semeda {

/// Malformed, missing or inconsistent files and datasets.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite losses or failed gradient checks.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace semeda
