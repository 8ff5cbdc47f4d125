#pragma once

#include <stdexcept>
#include <string>

namespace composer {

// Base class for all composer errors. Everything fails loud.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or dimension mismatch between tensors/blocks.
struct DimensionError : Error {
  using Error::Error;
};

// Invalid argument value (out-of-range parameter, unknown enum, bad config).
struct ParameterError : Error {
  using Error::Error;
};

// Assets cannot fit on the canvas even with fallback packing.
struct CapacityError : Error {
  using Error::Error;
};

// A selected asset has no phrase to bind to.
struct BindingError : Error {
  using Error::Error;
};

// Conditioning does not match the model's mode.
struct ModeError : Error {
  using Error::Error;
};

// NaN/Inf encountered where finite values are required.
struct NumericError : Error {
  using Error::Error;
};

// File read/write failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace composer
