#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gridcap {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// A structurally invalid network or profile. `entity()` names the offender.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& entity, const std::string& what)
      : Error(entity + ": " + what), entity_(entity) {}
  const std::string& entity() const noexcept { return entity_; }

 private:
  std::string entity_;
};

class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residual_history() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

class CollapseDetected : public Error {
 public:
  using Error::Error;
};

class DegeneratePositiveSequence : public Error {
 public:
  using Error::Error;
};

class NumericalBreakdown : public Error {
 public:
  NumericalBreakdown(const std::string& what, std::size_t pivots)
      : Error(what), pivots_(pivots) {}
  std::size_t pivot_history_length() const noexcept { return pivots_; }

 private:
  std::size_t pivots_;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

class NoProgress : public Error {
 public:
  using Error::Error;
};

}  // namespace gridcap
