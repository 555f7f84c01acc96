#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qseg {

// Base of every error raised by the library. The CLI maps subclasses to exit
// codes: NonFiniteLoss is a numeric failure, everything else is a data error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class InvalidQuery : public Error { using Error::Error; };
class LengthMismatch : public Error { using Error::Error; };
class EmptyCorpus : public Error { using Error::Error; };
class EmptyDataset : public Error { using Error::Error; };
class AlignmentMismatch : public Error { using Error::Error; };
class ShapeMismatch : public Error { using Error::Error; };
class NonScalarRoot : public Error { using Error::Error; };
class NonFiniteLoss : public Error { using Error::Error; };
class NoSourceEnabled : public Error { using Error::Error; };
class InfeasibleConfig : public Error { using Error::Error; };
// Malformed or version-mismatched binary file (index, model, feature stream).
class FormatError : public Error { using Error::Error; };

}  // namespace qseg
