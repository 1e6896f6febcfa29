#pragma once

#include <stdexcept>
#include <string>

namespace tomo {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a topology file or edge list fails validation.
class TopologyError : public Error {
 public:
  enum class Kind {
    Syntax,
    MultipleParents,
    NonDenseIds,
    Cycle,
    RootDegree,
    UnidentifiableChain,
    BadRate,
  };

  TopologyError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Raised when observation data cannot be read or is inconsistent.
class ObservationError : public Error {
 public:
  explicit ObservationError(const std::string& what) : Error(what) {}
};

// Raised when an estimator cannot produce a finite estimate for a node.
class EstimatorError : public Error {
 public:
  explicit EstimatorError(const std::string& what) : Error(what) {}
};

// Raised for invalid experiment configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

}  // namespace tomo
