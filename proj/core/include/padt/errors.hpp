#pragma once

#include <stdexcept>
#include <string>

namespace padt {

// Typed errors so callers can distinguish contract violations without
// string-matching. All inherit from the std hierarchy.

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IndexError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

struct EmptyRegionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct TaskError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct VocabRangeError : std::out_of_range {
  using std::out_of_range::out_of_range;
};

// A ground-truth token was marked masked, or a mask contradicts its sequence.
struct MaskConsistencyError : std::logic_error {
  using std::logic_error::logic_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace padt
