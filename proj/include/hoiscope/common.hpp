#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace hoiscope {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Invalid parameters / malformed configuration. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 2;
};

// Malformed or unusable input data. CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 3;
};

// Numerical failure (non-finite values, factorization breakdown). CLI exit code 4.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
  static constexpr int exit_code = 4;
};

}  // namespace hoiscope
