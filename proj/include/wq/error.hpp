#pragma once

#include <stdexcept>
#include <string>

namespace wq {

// Base of every error the toolkit throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or structurally invalid input data (missing cells, bad dates, NaNs).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration: unknown family, bad hyperparameter, missing path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Failures while fitting, predicting or scoring a model.
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace wq
