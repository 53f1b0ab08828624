#pragma once

#include <stdexcept>
#include <string>

namespace hbre {

/// Input rejected by a constructor or operation precondition.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// The true result is infinite (e.g. f'(1-) for an infinite-mean law).
class UnboundedResult : public std::overflow_error {
 public:
  explicit UnboundedResult(const std::string& what) : std::overflow_error(what) {}
};

/// Bracketing iteration hit its cap before reaching tolerance.
class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, double bracket_width)
      : std::runtime_error(what + " (bracket width " + std::to_string(bracket_width) + ")"),
        bracket_width_(bracket_width) {}

  double bracket_width() const noexcept { return bracket_width_; }

 private:
  double bracket_width_;
};

/// Operation not defined for the given offspring law.
class UnsupportedLaw : public std::logic_error {
 public:
  explicit UnsupportedLaw(const std::string& what) : std::logic_error(what) {}
};

/// Error raised while folding a per-generation operation; carries the index.
class CompositionError : public std::runtime_error {
 public:
  CompositionError(const std::string& what, std::size_t index)
      : std::runtime_error("at environment index " + std::to_string(index) + ": " + what),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace hbre
