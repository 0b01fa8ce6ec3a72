#include "enetlts/data_model.hpp"

#include <algorithm>
#include <string>

namespace enetlts {

Dataset Dataset::make(Matrix X, IntVector labels, int K) {
  if (labels.size() != X.rows())
    throw DimensionError("label vector length " + std::to_string(labels.size()) +
                         " does not match row count " + std::to_string(X.rows()));
  if (labels.size() == 0) throw Error("dataset must contain observations");
  if (K < 1) throw Error("group count must be positive");
  if (!X.allFinite()) throw NumericError("predictor matrix contains non-finite entries");

  Dataset d;
  d.K = K;
  d.group_counts.assign(static_cast<std::size_t>(K), 0);
  d.group_indexes.assign(static_cast<std::size_t>(K), {});
  for (Index i = 0; i < labels.size(); ++i) {
    const int g = labels[i];
    if (g < 1 || g > K)
      throw InvalidLabelError("label " + std::to_string(g) + " at index " +
                              std::to_string(i) + " outside {1.." +
                              std::to_string(K) + "}");
    d.group_counts[static_cast<std::size_t>(g - 1)]++;
    d.group_indexes[static_cast<std::size_t>(g - 1)].push_back(static_cast<int>(i));
  }
  for (int l = 0; l < K; ++l) {
    if (d.group_counts[static_cast<std::size_t>(l)] < 1)
      throw InvalidLabelError("group " + std::to_string(l + 1) +
                              " has no observations");
  }
  d.X = std::move(X);
  d.labels = std::move(labels);
  return d;
}

Dataset Dataset::make(Matrix X, IntVector labels) {
  if (labels.size() == 0) throw Error("dataset must contain observations");
  return make(std::move(X), labels, labels.maxCoeff());
}

Matrix indicator_matrix(const IntVector& labels, int K) {
  if (labels.size() == 0) throw Error("indicator_matrix requires labels");
  Matrix Y = Matrix::Zero(labels.size(), K);
  for (Index i = 0; i < labels.size(); ++i) {
    const int g = labels[i];
    if (g < 1 || g > K)
      throw InvalidLabelError("label " + std::to_string(g) + " at index " +
                              std::to_string(i) + " outside {1.." +
                              std::to_string(K) + "}");
    Y(i, g - 1) = 1.0;
  }
  return Y;
}

GroupQuota stratified_sizes(const std::vector<int>& group_counts, int h) {
  const int K = static_cast<int>(group_counts.size());
  if (K < 2) throw Error("stratified_sizes requires at least two groups");
  int n = 0;
  for (int c : group_counts) n += c;
  if (h < 1 || h > n)
    throw Error("subset size h=" + std::to_string(h) + " outside [1, n=" +
                std::to_string(n) + "]");

  GroupQuota quota;
  quota.h = h;
  quota.per_group.assign(static_cast<std::size_t>(K), 0);
  int assigned = 0;
  for (int l = 0; l < K - 1; ++l) {
    const long long nl = group_counts[static_cast<std::size_t>(l)];
    int hl = static_cast<int>((nl + 1) * static_cast<long long>(h) / n);
    hl = std::min(hl, static_cast<int>(nl));
    quota.per_group[static_cast<std::size_t>(l)] = hl;
    assigned += hl;
  }
  quota.per_group[static_cast<std::size_t>(K - 1)] = h - assigned;

  for (int l = 0; l < K; ++l) {
    const int hl = quota.per_group[static_cast<std::size_t>(l)];
    const int nl = group_counts[static_cast<std::size_t>(l)];
    if (hl < 1)
      throw InfeasibleQuotaError("group " + std::to_string(l + 1) +
                                 " receives quota " + std::to_string(hl) +
                                 "; raise h");
    if (hl > nl)
      throw InfeasibleQuotaError("group " + std::to_string(l + 1) +
                                 " quota " + std::to_string(hl) +
                                 " exceeds group size " + std::to_string(nl));
  }
  return quota;
}

std::vector<int> stratified_folds(const std::vector<int>& subset_labels, int k,
                                  int K, Rng& rng) {
  if (k < 2) throw Error("fold count must be at least 2");
  const int m = static_cast<int>(subset_labels.size());
  std::vector<std::vector<int>> members(static_cast<std::size_t>(K));
  for (int i = 0; i < m; ++i) {
    const int g = subset_labels[static_cast<std::size_t>(i)];
    if (g < 1 || g > K)
      throw InvalidLabelError("label " + std::to_string(g) + " at index " +
                              std::to_string(i) + " outside {1.." +
                              std::to_string(K) + "}");
    members[static_cast<std::size_t>(g - 1)].push_back(i);
  }

  std::vector<int> fold(static_cast<std::size_t>(m), -1);
  for (int l = 0; l < K; ++l) {
    auto& idx = members[static_cast<std::size_t>(l)];
    const int ml = static_cast<int>(idx.size());
    if (ml < k)
      throw DegenerateFoldError("group " + std::to_string(l + 1) + " has " +
                                std::to_string(ml) + " members, fewer than k=" +
                                std::to_string(k));
    // Random member order and a random fold rotation: fold perm[i mod k]
    // receives either floor(ml/k) or ceil(ml/k) members.
    rng.shuffle(idx);
    std::vector<int> perm(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) perm[static_cast<std::size_t>(f)] = f;
    rng.shuffle(perm);
    for (int i = 0; i < ml; ++i)
      fold[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] =
          perm[static_cast<std::size_t>(i % k)];
  }
  return fold;
}

}  // namespace enetlts
