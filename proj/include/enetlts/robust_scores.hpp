// Outlyingness in the score space: per-group SVD rank reduction, MCD
// location/scatter by elemental resampling with concentration steps, robust
// Mahalanobis distances, and chi-square-median scaling.

#pragma once

#include "enetlts/rng.hpp"
#include "enetlts/types.hpp"

#include <vector>

namespace enetlts {

// Linear scores z_il = b_l0 + x_i' b_l, no softmax. Under the sum-zero
// convention every row sums to zero.
Matrix score_matrix(const CoefficientMatrix& B, const Matrix& X);

struct ReducedScores {
  Matrix U;      // n_l x r, left singular vectors scaled by singular values
  int rank = 0;  // retained rank; 0 signals the degenerate fallback
  Matrix basis;  // right singular vectors of the retained subspace
};

// SVD of a group's score block. Singular values below 1e-8 of the largest
// are dropped; if even the largest is below 1e-12 the block is rank zero.
// Scaling U by the singular values preserves row geometry on the retained
// subspace.
ReducedScores reduce_rank(const Matrix& Z_group);

struct McdControls {
  int n_starts = 500;     // random elemental starts
  int keep = 10;          // candidates iterated to convergence
  int initial_csteps = 2; // concentration steps per start before ranking
  int max_csteps = 100;
};

struct McdEstimate {
  Vector location;           // length r
  Matrix scatter;            // r x r, symmetric positive definite
  std::vector<int> support;  // covering h_mcd-subset, sorted
  double det = 0.0;          // determinant of the support's sample covariance
  bool repaired = false;     // scatter needed a diagonal ridge
};

// FAST-MCD style search: elemental (r+1)-point starts, two concentration
// steps each, the best `keep` candidates iterated until the determinant
// stops decreasing. h_mcd = floor((n+1) * h_fraction), capped at n.
McdEstimate mcd_estimate(const Matrix& U, double h_fraction, Rng& rng,
                         const McdControls& controls = {});

// sqrt((u - t)' C^{-1} (u - t)) per row of U.
Vector mahalanobis_distances(const Matrix& U, const Vector& location,
                             const Matrix& scatter);

// Multiplies every distance by sqrt(chi2 median at `rank` df) / median(rd),
// so the scaled distances have group median exactly at the chi-square root.
Vector scaled_outlyingness(const Vector& rd, int rank);

struct OutlyingnessReport {
  Vector rd;         // raw robust distance per observation
  Vector rd_scaled;  // group-wise scaled distance per observation
  IntVector group;   // 1-based group id per observation
};

// Per group: score block -> reduce_rank -> MCD on the reduced coordinates
// -> robust distances -> chi-square-median scaling. Groups whose score
// block is rank zero, or whose distances have zero median, fall back to
// all-zero scaled distances (downstream selection then ranks by deviance).
OutlyingnessReport groupwise_outlyingness(const CoefficientMatrix& B,
                                          const Matrix& X,
                                          const IntVector& labels, int K,
                                          Rng& rng, double h_fraction = 0.75,
                                          const McdControls& controls = {});

}  // namespace enetlts
