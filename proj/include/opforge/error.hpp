#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace opforge {

// Error categories double as CLI exit codes.
enum class ErrorKind {
  Config = 2,
  Data = 3,
  Numerical = 4,
  Shape = 5,
  Contract = 6,
  NotFound = 7,
  Io = 8,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::Data, w) {}
};
struct NumericalError : Error {
  explicit NumericalError(const std::string& w) : Error(ErrorKind::Numerical, w) {}
};
struct ShapeError : Error {
  explicit ShapeError(const std::string& w) : Error(ErrorKind::Shape, w) {}
};
struct ContractError : Error {
  explicit ContractError(const std::string& w) : Error(ErrorKind::Contract, w) {}
};
struct NotFoundError : Error {
  explicit NotFoundError(const std::string& w) : Error(ErrorKind::NotFound, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::Io, w) {}
};

// Raised when the requested spatial resolution cannot host the model.
struct ResolutionError : ConfigError {
  explicit ResolutionError(const std::string& w) : ConfigError(w) {}
};

struct ArgumentError : ContractError {
  explicit ArgumentError(const std::string& w) : ContractError(w) {}
};
struct LookupError : NotFoundError {
  explicit LookupError(const std::string& w) : NotFoundError(w) {}
};
struct ProfileIntegrityError : ConfigError {
  explicit ProfileIntegrityError(const std::string& w) : ConfigError(w) {}
};
struct InfeasibleBudgetError : ConfigError {
  explicit InfeasibleBudgetError(const std::string& w) : ConfigError(w) {}
};
struct DivisibilityError : ConfigError {
  explicit DivisibilityError(const std::string& w) : ConfigError(w) {}
};
// Non-positive PDE coefficient and similar out-of-domain inputs.
struct DomainError : DataError {
  explicit DomainError(const std::string& w) : DataError(w) {}
};

// Zero-norm target in a relative loss; carries the offending sample.
struct DegenerateSampleError : DataError {
  DegenerateSampleError(std::size_t index, const std::string& w) : DataError(w), sample(index) {}
  std::size_t sample;
};

}  // namespace opforge
