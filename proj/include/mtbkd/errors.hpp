#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mtbkd {

// Caller broke a documented precondition (dimension mismatch, invalid spec).
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A computation produced non-finite values; message carries the location.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training loss became non-finite at a known epoch.
struct TrainingError : NumericError {
  TrainingError(const std::string& what, std::size_t epoch_index)
      : NumericError(what + " (epoch " + std::to_string(epoch_index) + ")"),
        epoch(epoch_index) {}
  std::size_t epoch;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mtbkd
