#pragma once

#include <stdexcept>
#include <string>

namespace fv {

// Base class for all errors thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration value or malformed config file.
struct ConfigError : Error {
  using Error::Error;
};

// Dimension / layout mismatch between inputs.
struct ShapeError : Error {
  using Error::Error;
};

// Point outside the region where the distortion model is bijective.
struct OutOfModelError : Error {
  using Error::Error;
};

// Iterative inversion did not reach tolerance within the iteration cap.
struct NonConvergenceError : Error {
  using Error::Error;
};

// Camera ray does not intersect the ground plane.
struct NoGroundError : Error {
  using Error::Error;
};

// World point not visible from the camera.
struct NotVisibleError : Error {
  using Error::Error;
};

// Operation requires a non-empty input.
struct EmptyInputError : Error {
  using Error::Error;
};

// Not enough samples / observations to run the operation.
struct InsufficientDataError : Error {
  using Error::Error;
};

// Classifier training could not separate the given data.
struct TrainingError : Error {
  using Error::Error;
};

// Malformed or version-mismatched serialized record.
struct FormatError : Error {
  using Error::Error;
};

// No field region found in the image.
struct NoFieldError : Error {
  using Error::Error;
};

// Filesystem read/write failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace fv
