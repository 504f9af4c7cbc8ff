#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace bsrg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Field/operator lives on the wrong lattice or has the wrong size.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class DivisibilityError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class InvertibilityError : public Error {
 public:
  InvertibilityError(const std::string& what, double smallest_singular_value)
      : Error(what + " (smallest singular value " + std::to_string(smallest_singular_value) + ")"),
        sigma_min_(smallest_singular_value) {}
  double smallest_singular_value() const { return sigma_min_; }

 private:
  double sigma_min_;
};

class SpectralError : public Error {
 public:
  SpectralError(const std::string& what, double min_eigenvalue)
      : Error(what + " (minimum Hermitian-part eigenvalue " + std::to_string(min_eigenvalue) + ")"),
        min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

class BranchError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& residual_history() const { return history_; }

 private:
  std::vector<double> history_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DomainEscapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace bsrg
