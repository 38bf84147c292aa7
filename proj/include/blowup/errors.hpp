#pragma once

// Error taxonomy for the blow-up expansion library.  Every failure mode that
// callers are expected to branch on gets its own type; all of them derive
// from BlowupError so the CLI can map them onto exit codes in one place.

#include <stdexcept>
#include <string>

namespace blowup {

class BlowupError : public std::runtime_error {
 public:
  explicit BlowupError(const std::string& msg) : std::runtime_error(msg) {}
};

// --- input / parse stage ---------------------------------------------------

class ParseError : public BlowupError {
 public:
  ParseError(const std::string& msg, int line, int col)
      : BlowupError("parse error at " + std::to_string(line) + ":" +
                    std::to_string(col) + ": " + msg),
        line(line),
        col(col) {}
  int line, col;
};

class UnknownIdentifier : public ParseError {
 public:
  UnknownIdentifier(const std::string& name, int line, int col)
      : ParseError("unknown identifier '" + name + "'", line, col) {}
};

class NonLiteralExponent : public ParseError {
 public:
  NonLiteralExponent(const std::string& what, int line, int col)
      : ParseError("exponent must fold to a literal: " + what, line, col) {}
};

class ProblemFormatError : public BlowupError {
 public:
  explicit ProblemFormatError(const std::string& msg)
      : BlowupError("problem file: " + msg) {}
};

// --- vector-field structure ------------------------------------------------

// A term's scaling weight exceeds the quasi-homogeneous weight of its
// component, so the field cannot be split into quasi part + lower-order rest.
class WeightTooHigh : public BlowupError {
 public:
  WeightTooHigh(int component, double weight, double limit,
                const std::string& term)
      : BlowupError("component " + std::to_string(component) + ": term '" +
                    term + "' has scaling weight " + std::to_string(weight) +
                    " above the admissible " + std::to_string(limit)),
        component(component),
        weight(weight),
        limit(limit) {}
  int component;
  double weight, limit;
};

// Raised when a component is not a sum of monomials and a structural
// (per-monomial) analysis was requested.
class NotMonomialSum : public BlowupError {
 public:
  explicit NotMonomialSum(const std::string& msg)
      : BlowupError("not a sum of monomials: " + msg) {}
};

class CertificateError : public BlowupError {
 public:
  explicit CertificateError(const std::string& msg)
      : BlowupError("scaling certificate failed: " + msg) {}
};

// --- numeric evaluation ----------------------------------------------------

class DivisionNearZero : public BlowupError {
 public:
  explicit DivisionNearZero(double denom)
      : BlowupError("division by near-zero value " + std::to_string(denom)) {}
};

class NegativeBaseRealPower : public BlowupError {
 public:
  NegativeBaseRealPower(double base, double expo)
      : BlowupError("real power with non-positive base: " +
                    std::to_string(base) + "^" + std::to_string(expo)) {}
};

// --- series algebra --------------------------------------------------------

class SeriesDomainError : public BlowupError {
 public:
  explicit SeriesDomainError(const std::string& msg)
      : BlowupError("series: " + msg) {}
};

// --- spectral stage --------------------------------------------------------

class NoRootFound : public BlowupError {
 public:
  explicit NoRootFound(const std::string& msg)
      : BlowupError("balance equation: " + msg) {}
};

class JacobianSingularAtIterate : public BlowupError {
 public:
  explicit JacobianSingularAtIterate(const std::string& msg)
      : BlowupError("Newton Jacobian singular: " + msg) {}
};

class ComplexSpectrumUnsupported : public BlowupError {
 public:
  explicit ComplexSpectrumUnsupported(const std::string& msg)
      : BlowupError("complex eigenvalues are unsupported: " + msg) {}
};

class NonHyperbolicError : public BlowupError {
 public:
  explicit NonHyperbolicError(const std::string& msg)
      : BlowupError("power matrix is not hyperbolic: " + msg) {}
};

class IllConditionedJordan : public BlowupError {
 public:
  explicit IllConditionedJordan(const std::string& msg)
      : BlowupError("Jordan decomposition ill-conditioned: " + msg) {}
};

// --- expansion stage -------------------------------------------------------

// |gamma + 1 + lambda| landed between the hard-resonance tolerance and the
// detection tolerance: both the resonant and non-resonant branch are
// plausible, so neither is silently chosen.
class ResonanceToleranceAmbiguous : public BlowupError {
 public:
  ResonanceToleranceAmbiguous(double r, const std::string& resonant_term,
                              const std::string& nonresonant_term)
      : BlowupError("resonance ambiguous: |gamma+1+lambda| = " +
                    std::to_string(r) + "; resonant candidate " +
                    resonant_term + ", non-resonant candidate " +
                    nonresonant_term),
        r(r),
        resonant_candidate(resonant_term),
        nonresonant_candidate(nonresonant_term) {}
  double r;
  std::string resonant_candidate, nonresonant_candidate;
};

// --- validation stage ------------------------------------------------------

class IntegratorStepFailure : public BlowupError {
 public:
  explicit IntegratorStepFailure(const std::string& msg)
      : BlowupError("adaptive integrator: " + msg) {}
};

class ValidationFailure : public BlowupError {
 public:
  explicit ValidationFailure(const std::string& msg)
      : BlowupError("validation: " + msg) {}
};

}  // namespace blowup
