#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace omahgnn {

// Violated precondition: wrong shapes, out-of-range task, empty input.
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// A value became NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// The finite-difference oracle could not produce a usable estimate.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class DataErrorCode {
  kMissingFile,
  kMalformed,
  kRaggedFeatures,
  kSplitOverlap,
  kLabelOutOfRange,
  kNodeOutOfRange,
  kDuplicateMembership,
  kEmptyHyperedge,
  kUnlabeledSplitNode,
  kShapeMismatch,
  kUnwritable,
};

const char* to_string(DataErrorCode code);

class DataError : public std::runtime_error {
 public:
  DataError(DataErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  DataErrorCode code() const noexcept { return code_; }

 private:
  DataErrorCode code_;
};

}  // namespace omahgnn
