#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mufen {

// Invalid caller input: bad arguments, inconsistent shapes of domain objects,
// violated preconditions.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed input file. Carries a 1-based line number when one is known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Tensor/matrix shape incompatibility. Message names both shapes.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite value produced where finiteness is an invariant.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

class UnsupportedProjectionError : public ValidationError {
 public:
  explicit UnsupportedProjectionError(const std::string& what) : ValidationError(what) {}
};

class EmptySilhouetteError : public std::runtime_error {
 public:
  explicit EmptySilhouetteError(const std::string& what) : std::runtime_error(what) {}
};

class MissingModalityError : public std::runtime_error {
 public:
  explicit MissingModalityError(const std::string& modality)
      : std::runtime_error("missing modality: " + modality) {}
};

class DegenerateVarianceError : public std::runtime_error {
 public:
  explicit DegenerateVarianceError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

inline void require_finite(double v, const std::string& what) {
  if (!std::isfinite(v)) throw ValidationError(what + ": non-finite value");
}

}  // namespace mufen
