#ifndef PRIORSFM_UTIL_ERRORS_H_
#define PRIORSFM_UTIL_ERRORS_H_

#include <stdexcept>
#include <string>

namespace priorsfm {

// Contract violations raised by geometry and estimation routines. Routine
// "expected" failures (RANSAC finding no consensus, a point triangulating
// behind a camera) are reported through result flags instead, so only genuine
// misuse or unusable inputs throw.

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Point projected with non-positive depth.
class CheiralityError : public Error {
 public:
  using Error::Error;
};

// Non-positive or non-finite depth where a valid depth is required.
class InvalidDepthError : public Error {
 public:
  using Error::Error;
};

// Raster access outside the interpolation domain.
class OutOfBoundsError : public Error {
 public:
  using Error::Error;
};

// Interpolation touched an invalid (NaN) raster cell.
class InvalidNeighborError : public Error {
 public:
  using Error::Error;
};

// Raster dimensions or channel counts disagree.
class ShapeMismatchError : public Error {
 public:
  using Error::Error;
};

// Fewer correspondences than the minimal sample requires.
class InsufficientMatchesError : public Error {
 public:
  using Error::Error;
};

// An optimization produced non-finite values or an unsolvable system.
class SolverError : public Error {
 public:
  using Error::Error;
};

// An operation requiring at least one usable observation received none
// (e.g. depth scaling with no keypoint landing on valid prior depth).
class NoValidObservationsError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries file and line context in the message.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Input data violates a documented scene-format invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Filesystem write or rename failure during serialization.
class IoError : public Error {
 public:
  using Error::Error;
};

// No candidate image pair produced an acceptable two-camera seed.
class InitializationFailedError : public Error {
 public:
  using Error::Error;
};

// Unknown synthetic scene preset name.
class PresetInvalidError : public Error {
 public:
  using Error::Error;
};

// Pose evaluation received fewer than two images present in both sets.
class NoCommonImagesError : public Error {
 public:
  using Error::Error;
};

}  // namespace priorsfm

#endif  // PRIORSFM_UTIL_ERRORS_H_
