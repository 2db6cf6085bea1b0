#pragma once

#include <stdexcept>
#include <string>

namespace trms {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// No equilibrium exists for the requested angles inside the input limits.
class InfeasibleTrim : public Error {
 public:
  using Error::Error;
};

// Riccati / observer / projector synthesis could not produce a stabilizing design.
class SynthesisError : public Error {
 public:
  using Error::Error;
};

// A local model violates a structural assumption (rank, detectability, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration or trace input.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace trms
