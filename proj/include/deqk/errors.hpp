#pragma once

#include <stdexcept>
#include <string>

namespace deqk {

/// Argument outside the mathematical domain of a map (e.g. |rho| > 1).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Shapes or sizes do not agree, or a count is too small.
class dimension_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver exhausted its budget.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A square root in the activation matching has a negative argument.
class radicand_error : public std::domain_error {
 public:
  radicand_error(std::string quantity, double value)
      : std::domain_error("negative radicand in " + quantity + ": " + std::to_string(value)),
        quantity_(std::move(quantity)),
        value_(value) {}

  const std::string& quantity() const noexcept { return quantity_; }
  double value() const noexcept { return value_; }

 private:
  std::string quantity_;
  double value_;
};

/// Reading or writing an artifact failed.
class io_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; line is 0 when no source location applies.
class config_error : public std::invalid_argument {
 public:
  explicit config_error(const std::string& what, int line = 0)
      : std::invalid_argument(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

}  // namespace deqk
