#pragma once

#include <stdexcept>
#include <string>

namespace clothsense {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CalibrationError : public Error { using Error::Error; };
class EmptyInputError : public Error { using Error::Error; };
class SizeError : public Error { using Error::Error; };
class MarginError : public Error { using Error::Error; };
class BoundsError : public Error { using Error::Error; };
class PoseError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class UnexplorableItemError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace clothsense
