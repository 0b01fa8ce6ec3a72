// Dataset representation, indicator responses, and group-stratified subset
// sizing / fold assignment.

#pragma once

#include "enetlts/rng.hpp"
#include "enetlts/types.hpp"

#include <vector>

namespace enetlts {

// Immutable after construction; safe for concurrent reads.
struct Dataset {
  Matrix X;                                     // n x p, rows = observations
  IntVector labels;                             // length n, values in {1..K}
  int K = 0;                                    // number of groups
  std::vector<int> group_counts;                // n_l, length K
  std::vector<std::vector<int>> group_indexes;  // row indexes per group

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }

  // Validates labels and finiteness and fills the group bookkeeping.
  static Dataset make(Matrix X, IntVector labels, int K);
  // Infers K as the largest label.
  static Dataset make(Matrix X, IntVector labels);
};

// 0/1 indicator response matrix, n x K, one 1 per row.
Matrix indicator_matrix(const IntVector& labels, int K);

struct GroupQuota {
  int h = 0;                   // total subset size
  std::vector<int> per_group;  // h_l, sums to h, 1 <= h_l <= n_l
};

// Per-group subset sizes h_l = floor((n_l+1) h / n), capped at n_l, with the
// last group absorbing the remainder. Any resulting h_l < 1 (or a remainder
// the last group cannot hold) is an infeasible quota.
GroupQuota stratified_sizes(const std::vector<int>& group_counts, int h);

// Assigns each subset member to one of k folds so that every group's
// members are spread across folds with counts differing by at most one.
// Deterministic for a fixed rng state.
std::vector<int> stratified_folds(const std::vector<int>& subset_labels, int k,
                                  int K, Rng& rng);

}  // namespace enetlts
