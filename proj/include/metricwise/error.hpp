#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metricwise {

// Base of every error raised by the library. `kind()` is stable and is what
// the CLI maps onto exit codes.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    Validation,
    DegenerateMetric,
    DegenerateEstimate,
    MissingLabel,
    InvalidBudget,
    InvalidWeights,
  };

  Error(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

  // Degenerate-estimation failures are recoverable per repetition.
  bool is_degenerate() const noexcept {
    return kind_ == Kind::DegenerateMetric || kind_ == Kind::DegenerateEstimate;
  }

 private:
  Kind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(Kind::Validation, what) {}
};

class DegenerateMetric : public Error {
 public:
  explicit DegenerateMetric(const std::string& metric)
      : Error(Kind::DegenerateMetric,
              "degenerate metric " + metric + ": denominator is zero"),
        metric_(metric) {}
  const std::string& metric() const noexcept { return metric_; }

 private:
  std::string metric_;
};

class DegenerateEstimate : public Error {
 public:
  explicit DegenerateEstimate(const std::string& what)
      : Error(Kind::DegenerateEstimate, what) {}
};

class MissingLabel : public Error {
 public:
  explicit MissingLabel(std::size_t index)
      : Error(Kind::MissingLabel,
              "missing label for sampled index " + std::to_string(index)),
        index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class InvalidBudget : public Error {
 public:
  explicit InvalidBudget(const std::string& what)
      : Error(Kind::InvalidBudget, what) {}
};

class InvalidWeights : public Error {
 public:
  explicit InvalidWeights(const std::string& what)
      : Error(Kind::InvalidWeights, what) {}
};

}  // namespace metricwise
