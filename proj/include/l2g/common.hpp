#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace l2g {

using NodeId = std::int64_t;
using NodeList = std::vector<NodeId>;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Raised for every contract violation and unrecoverable failure in the
/// library. Messages name the offending item (line, patch, node, file).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Short human-readable rendering of a number for messages ("1.2e-10").
inline std::string describe(double x) {
  std::ostringstream s;
  s.precision(3);
  s << x;
  return s.str();
}

/// Non-fatal diagnostics accumulated by numerical routines.
using Warnings = std::vector<std::string>;

}  // namespace l2g
