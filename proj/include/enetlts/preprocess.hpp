// Column standardization (robust and subset-classical) and the coefficient
// back-transformation to the original scale.

#pragma once

#include "enetlts/types.hpp"

#include <utility>
#include <vector>

namespace enetlts {

enum class ScalingKind { robust, classical };

struct ScalingInfo {
  Vector centers;               // length p
  Vector scales;                // length p, strictly positive
  std::vector<bool> constant;   // column flagged constant (scale forced to 1)
  ScalingKind kind = ScalingKind::robust;
};

// Median/MAD standardization of every column. Zero MAD falls back to the
// standard deviation; a fully constant column keeps scale 1 and is flagged.
std::pair<Matrix, ScalingInfo> robust_standardize(const Matrix& X);

// Mean/sd computed on the given rows only, applied to all rows.
std::pair<Matrix, ScalingInfo> subset_standardize(const Matrix& X,
                                                  const std::vector<int>& subset);

// Maps coefficients fitted on standardized predictors back to the original
// scale, preserving all linear scores exactly.
Matrix backtransform(const Matrix& B_std, const ScalingInfo& scaling);

// Inverse of backtransform; used to warm-start fits in a new scaling frame.
Matrix forward_transform(const Matrix& B, const ScalingInfo& scaling);

}  // namespace enetlts
