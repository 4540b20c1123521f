#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace groupmix {

/// Precondition or dimension violation on an in-memory API call.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dataset or model file rejected at load time. Messages carry the file
/// path and the offending line number where available.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite objective. Carries the EM iteration
/// at which the value degenerated.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, std::size_t iteration)
      : std::runtime_error(what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_ = 0;
};

}  // namespace groupmix
