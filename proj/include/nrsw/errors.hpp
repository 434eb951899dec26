#pragma once

#include <stdexcept>
#include <string>

namespace nrsw {

struct InvalidKernelError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OutOfRangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedOrderError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Circulant embedding failed to produce a usable nonnegative spectrum
// even at maximum padding.
struct EmbeddingError : std::runtime_error {
  EmbeddingError(const std::string& what, double worst)
      : std::runtime_error(what), most_negative_eigenvalue(worst) {}
  double most_negative_eigenvalue;
};

struct InvalidRegionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnsupportedVertexError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct InvalidVertexError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DegenerateConditioningError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SpecMismatchError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace nrsw
