#pragma once

#include <stdexcept>
#include <string>

namespace care {

// Root of every exception the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed tabular input. `row` is the 1-based data row (header excluded), 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row = 0) : Error(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class DegenerateRangeError : public Error {
 public:
  using Error::Error;
};

class UndefinedCorrelationError : public Error {
 public:
  using Error::Error;
};

class FittingError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class UnavailableGroupError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Invalid user configuration. `field` names the offending entry (e.g. "preferences.age.op");
// `infeasible` separates well-formed-but-unsatisfiable requests (a range on a categorical)
// from malformed ones.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string field = {}, bool infeasible = false)
      : Error(what), field_(std::move(field)), infeasible_(infeasible) {}
  const std::string& field() const { return field_; }
  bool infeasible() const { return infeasible_; }

 private:
  std::string field_;
  bool infeasible_;
};

class SchemaMismatchError : public Error {
 public:
  using Error::Error;
};

class RemotePredictorError : public Error {
 public:
  using Error::Error;
};

class TimeoutError : public RemotePredictorError {
 public:
  using RemotePredictorError::RemotePredictorError;
};

class EvaluationError : public Error {
 public:
  EvaluationError(const std::string& what, std::size_t generation, std::size_t individual)
      : Error(what), generation_(generation), individual_(individual) {}
  std::size_t generation() const { return generation_; }
  std::size_t individual() const { return individual_; }

 private:
  std::size_t generation_;
  std::size_t individual_;
};

}  // namespace care
