#pragma once

#include <stdexcept>
#include <string>

namespace cascnn {

// Base for all library errors; catches at the CLI map to exit code 1
// (runtime failure) unless they are usage errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor/layer shape disagreements. The message names the offending shapes.
struct ShapeError : Error {
    using Error::Error;
};

// Invalid user-supplied values (quality factor bounds, config schema, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Checkpoint file problems, one subtype per failure mode so callers can
// distinguish them.
struct CheckpointError : Error {
    using Error::Error;
};
struct CheckpointVersionError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct CheckpointTruncatedError : CheckpointError {
    using CheckpointError::CheckpointError;
};
struct CheckpointShapeError : CheckpointError {
    using CheckpointError::CheckpointError;
};

// Image file I/O problems (missing file, bad PGM/PPM header, ...).
struct IoError : Error {
    using Error::Error;
};

// Raised when training hits a non-finite loss; names the offending step.
struct NumericError : Error {
    using Error::Error;
};

}  // namespace cascnn
