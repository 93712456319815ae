#pragma once

#include <stdexcept>
#include <string>

namespace latrank {

// Malformed input or unusable arguments; the CLI maps this to exit code 2.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at runtime (divergence, non-finite objective at every
// start, a sampler that never moves); the CLI maps this to exit code 1.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace latrank
