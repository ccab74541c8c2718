#ifndef SCENE_LATENT_ERRORS_H_
#define SCENE_LATENT_ERRORS_H_

#include <stdexcept>
#include <string>

namespace scene_latent {

// Bad arguments, empty inputs, unparsable or inconsistent data. The CLI maps
// every Error subclass except NumericError to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during training or loss evaluation (exit code 2).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace scene_latent

#endif  // SCENE_LATENT_ERRORS_H_
