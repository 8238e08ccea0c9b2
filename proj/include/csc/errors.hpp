#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace csc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidThresholdError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class MaterializationError : public Error {
 public:
  using Error::Error;
};

class DegenerateDictionaryError : public Error {
 public:
  using Error::Error;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::vector<double> trace)
      : Error(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

class BoundInapplicableError : public Error {
 public:
  BoundInapplicableError(const std::string& what, std::size_t layer)
      : Error(what), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

class DegenerateClassError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Power iteration ran out of iterations; carries the last Rayleigh quotient
/// and iterate so callers can decide whether the estimate is usable.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_estimate,
                   std::vector<double> last_iterate)
      : Error(what),
        last_estimate_(last_estimate),
        last_iterate_(std::move(last_iterate)) {}
  double last_estimate() const { return last_estimate_; }
  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  double last_estimate_;
  std::vector<double> last_iterate_;
};

}  // namespace csc
