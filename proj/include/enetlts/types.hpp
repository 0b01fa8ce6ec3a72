// Core dense types and error hierarchy shared across the library.

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace enetlts {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IntVector = Eigen::VectorXi;
using Index = Eigen::Index;

// A coefficient matrix is (p+1) x K: row 0 holds the intercepts, rows 1..p
// the slopes. Under the sum-zero identifiability convention every row sums
// to zero, which keeps the score space inside the (K-1)-dimensional
// hyperplane orthogonal to the all-ones vector.
using CoefficientMatrix = Matrix;

inline auto intercepts(const CoefficientMatrix& B) { return B.row(0); }
inline auto slopes(const CoefficientMatrix& B) { return B.bottomRows(B.rows() - 1); }

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidLabelError : public Error {
 public:
  using Error::Error;
};

class InfeasibleQuotaError : public Error {
 public:
  using Error::Error;
};

class DegenerateFoldError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DegenerateDistanceError : public Error {
 public:
  using Error::Error;
};

class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

struct PenaltyParams {
  double alpha = 1.0;   // mix between ridge (0) and lasso (1)
  double lambda = 0.0;  // overall penalty strength

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw Error("alpha must lie in [0,1], got " + std::to_string(alpha));
    if (!(lambda >= 0.0))
      throw Error("lambda must be nonnegative, got " + std::to_string(lambda));
  }
};

}  // namespace enetlts
