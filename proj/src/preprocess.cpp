#include "enetlts/preprocess.hpp"

#include "enetlts/stats.hpp"

#include <cmath>
#include <string>

namespace enetlts {

namespace {

// Shared fallback chain: a zero primary scale falls back to the alternative;
// if both vanish the column is constant (scale 1, flagged). The standardized
// column is then identically zero on the defining rows, so the penalty keeps
// its slope at zero.
void finalize_scale(double fallback, double& scale, bool& constant_flag) {
  constant_flag = false;
  if (scale > 0.0) return;
  if (fallback > 0.0) {
    scale = fallback;
    return;
  }
  scale = 1.0;
  constant_flag = true;
}

double sample_sd(const Vector& v) {
  const Index m = v.size();
  if (m < 2) return 0.0;
  const double mean = v.mean();
  return std::sqrt((v.array() - mean).square().sum() / static_cast<double>(m - 1));
}

Matrix apply_scaling(const Matrix& X, const ScalingInfo& s) {
  return (X.rowwise() - s.centers.transpose()).array().rowwise() /
         s.scales.transpose().array();
}

}  // namespace

std::pair<Matrix, ScalingInfo> robust_standardize(const Matrix& X) {
  if (!X.allFinite()) throw NumericError("robust_standardize requires finite input");
  const Index p = X.cols();
  ScalingInfo s;
  s.kind = ScalingKind::robust;
  s.centers.resize(p);
  s.scales.resize(p);
  s.constant.assign(static_cast<std::size_t>(p), false);
  for (Index j = 0; j < p; ++j) {
    const Vector col = X.col(j);
    s.centers[j] = median(col);
    double scale = mad(col);
    bool flag = false;
    finalize_scale(sample_sd(col), scale, flag);
    s.scales[j] = scale;
    s.constant[static_cast<std::size_t>(j)] = flag;
  }
  return {apply_scaling(X, s), s};
}

std::pair<Matrix, ScalingInfo> subset_standardize(const Matrix& X,
                                                  const std::vector<int>& subset) {
  if (subset.size() < 2)
    throw Error("subset_standardize requires at least 2 rows, got " +
                std::to_string(subset.size()));
  const Index p = X.cols();
  Matrix Xs(static_cast<Index>(subset.size()), p);
  for (std::size_t i = 0; i < subset.size(); ++i)
    Xs.row(static_cast<Index>(i)) = X.row(subset[i]);

  ScalingInfo s;
  s.kind = ScalingKind::classical;
  s.centers.resize(p);
  s.scales.resize(p);
  s.constant.assign(static_cast<std::size_t>(p), false);
  for (Index j = 0; j < p; ++j) {
    const Vector col = Xs.col(j);
    s.centers[j] = col.mean();
    double scale = sample_sd(col);
    bool flag = false;
    finalize_scale(0.0, scale, flag);
    s.scales[j] = scale;
    s.constant[static_cast<std::size_t>(j)] = flag;
  }
  return {apply_scaling(X, s), s};
}

Matrix backtransform(const Matrix& B_std, const ScalingInfo& scaling) {
  const Index p = B_std.rows() - 1;
  if (p != scaling.centers.size())
    throw DimensionError("coefficient rows (" + std::to_string(B_std.rows()) +
                         ") do not match scaling length " +
                         std::to_string(scaling.centers.size()));
  Matrix B = B_std;
  for (Index j = 0; j < p; ++j) {
    B.row(j + 1) /= scaling.scales[j];
    B.row(0) -= B_std.row(j + 1) * (scaling.centers[j] / scaling.scales[j]);
  }
  return B;
}

Matrix forward_transform(const Matrix& B, const ScalingInfo& scaling) {
  const Index p = B.rows() - 1;
  if (p != scaling.centers.size())
    throw DimensionError("coefficient rows (" + std::to_string(B.rows()) +
                         ") do not match scaling length " +
                         std::to_string(scaling.centers.size()));
  Matrix B_std = B;
  for (Index j = 0; j < p; ++j) {
    B_std.row(j + 1) *= scaling.scales[j];
    B_std.row(0) += B.row(j + 1) * scaling.centers[j];
  }
  return B_std;
}

}  // namespace enetlts
