#pragma once

#include <stdexcept>
#include <string>

namespace htexp {

// Base class for every error raised by the library. The CLI maps subclasses
// onto its exit-code contract, so new error types should pick a parent class
// deliberately.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- invalid input (CLI exit 3) ---------------------------------------------

class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Matrix expected to be symmetric is not (beyond 1e-10 entrywise).
class NotSymmetric : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Matrix expected PSD has an eigenvalue below -1e-10.
class NotPsd : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Operands have incompatible shapes.
class ShapeMismatch : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Routine restricted to particular dimensions (e.g. scalar-sensor paths).
class WrongDimensions : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Discrete null distribution puts mass where the alternative has none.
class AbsoluteContinuityViolated : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Closed-form construction hit a vanishing denominator.
class DegenerateDenominator : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// Model file could not be parsed / failed schema validation.
class ParseError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

// --- numerical / state errors -------------------------------------------------

// A block that must be inverted is singular (or not strictly PD).
class SingularBlock : public Error {
 public:
  using Error::Error;
};

// Gamma(G) left the positive-definite cone.
class GammaSingular : public Error {
 public:
  using Error::Error;
};

// Omega outside the feasible box 0 <= Omega <= K_{X|Y}^{-1}.
class OmegaOutOfBox : public Error {
 public:
  using Error::Error;
};

// Effective information matrix S is asymmetric/indefinite beyond tolerance.
class EffectiveMatrixNotPsd : public Error {
 public:
  using Error::Error;
};

// Optimality condition required by the single-letter formula failed.
class ConditionCViolated : public Error {
 public:
  using Error::Error;
};

// Test-channel rate constraint I(S;X|U) <= R violated.
class RateConstraintViolated : public Error {
 public:
  using Error::Error;
};

// Enumeration caps exceeded (CLI exit 4).
class InstanceTooLarge : public Error {
 public:
  using Error::Error;
};

// Iterative solver hit its iteration cap (CLI exit 5).
class DidNotConverge : public Error {
 public:
  using Error::Error;
};

}  // namespace htexp
