#include "enetlts/robust_scores.hpp"

#include "enetlts/stats.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace enetlts {

namespace {

struct MeanCov {
  Vector mean;
  Matrix cov;  // sample covariance, 1/(h-1)
};

MeanCov subset_mean_cov(const Matrix& U, const std::vector<int>& idx) {
  const Index r = U.cols();
  const Index h = static_cast<Index>(idx.size());
  MeanCov mc;
  mc.mean = Vector::Zero(r);
  for (int i : idx) mc.mean += U.row(i).transpose();
  mc.mean /= static_cast<double>(h);
  mc.cov = Matrix::Zero(r, r);
  for (int i : idx) {
    const Vector d = U.row(i).transpose() - mc.mean;
    mc.cov.noalias() += d * d.transpose();
  }
  mc.cov /= static_cast<double>(h > 1 ? h - 1 : 1);
  return mc;
}

// Cholesky with progressive diagonal ridge for (near-)singular scatter.
struct SafeChol {
  Eigen::LLT<Matrix> llt;
  bool repaired = false;
  double ridge = 0.0;  // diagonal ridge actually applied
};

SafeChol safe_cholesky(const Matrix& C) {
  SafeChol out;
  out.llt.compute(C);
  if (out.llt.info() == Eigen::Success && (out.llt.matrixLLT().diagonal().array() > 0).all())
    return out;
  const Index r = C.rows();
  double ridge = 1e-10 * std::max(C.trace() / static_cast<double>(r), 1e-30);
  for (int attempt = 0; attempt < 60; ++attempt) {
    Matrix Crep = C + ridge * Matrix::Identity(r, r);
    out.llt.compute(Crep);
    if (out.llt.info() == Eigen::Success &&
        (out.llt.matrixLLT().diagonal().array() > 0).all()) {
      out.repaired = true;
      out.ridge = ridge;
      return out;
    }
    ridge *= 10.0;
  }
  throw NumericError("scatter matrix could not be repaired to positive definite");
}

Vector squared_distances(const Matrix& U, const Vector& mean,
                         const SafeChol& chol) {
  Vector d2(U.rows());
  for (Index i = 0; i < U.rows(); ++i) {
    const Vector diff = U.row(i).transpose() - mean;
    d2[i] = diff.dot(chol.llt.solve(diff));
  }
  return d2.cwiseMax(0.0);
}

// Indexes of the h smallest squared distances, ties by smaller index.
std::vector<int> smallest_h(const Vector& d2, int h) {
  std::vector<int> order(static_cast<std::size_t>(d2.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return d2[a] < d2[b]; });
  order.resize(static_cast<std::size_t>(h));
  std::sort(order.begin(), order.end());
  return order;
}

struct McdCandidate {
  double det = 0.0;
  std::vector<int> support;
  MeanCov mc;
  bool repaired = false;
};

McdCandidate evaluate_support(const Matrix& U, std::vector<int> support) {
  McdCandidate c;
  c.mc = subset_mean_cov(U, support);
  c.det = c.mc.cov.determinant();
  c.support = std::move(support);
  return c;
}

McdCandidate concentration_step(const Matrix& U, const McdCandidate& cur, int h) {
  SafeChol chol = safe_cholesky(cur.mc.cov);
  const Vector d2 = squared_distances(U, cur.mc.mean, chol);
  McdCandidate next = evaluate_support(U, smallest_h(d2, h));
  next.repaired = chol.repaired;
  return next;
}

}  // namespace

Matrix score_matrix(const CoefficientMatrix& B, const Matrix& X) {
  if (X.cols() != B.rows() - 1)
    throw DimensionError("X has " + std::to_string(X.cols()) +
                         " columns but coefficients expect " +
                         std::to_string(B.rows() - 1));
  Matrix Z = X * B.bottomRows(B.rows() - 1);
  Z.rowwise() += B.row(0);
  return Z;
}

ReducedScores reduce_rank(const Matrix& Z_group) {
  if (Z_group.rows() < 2)
    throw Error("reduce_rank requires at least 2 rows");
  Eigen::JacobiSVD<Matrix> svd(Z_group, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector sv = svd.singularValues();
  ReducedScores out;
  if (sv.size() == 0 || sv[0] <= 1e-12) {
    out.rank = 0;
    return out;
  }
  const double cutoff = 1e-8 * sv[0];
  int r = 0;
  while (r < sv.size() && sv[r] > cutoff) ++r;
  out.rank = r;
  out.U = svd.matrixU().leftCols(r) * sv.head(r).asDiagonal();
  out.basis = svd.matrixV().leftCols(r);
  return out;
}

McdEstimate mcd_estimate(const Matrix& U, double h_fraction, Rng& rng,
                         const McdControls& controls) {
  const int n = static_cast<int>(U.rows());
  const int r = static_cast<int>(U.cols());
  if (r < 1) throw Error("mcd_estimate requires at least one coordinate");
  if (n <= r + 1)
    throw Error("mcd_estimate requires n > r + 1 (n=" + std::to_string(n) +
                ", r=" + std::to_string(r) + ")");
  int h = static_cast<int>(std::floor((n + 1) * h_fraction));
  h = std::min(h, n);
  if (h < r + 1)
    throw Error("mcd subset size " + std::to_string(h) +
                " too small for dimension " + std::to_string(r));

  auto better = [](const McdCandidate& a, const McdCandidate& b) {
    return a.det < b.det;
  };

  // Elemental starts, two concentration steps each, keep the best few.
  std::vector<McdCandidate> kept;
  for (int s = 0; s < controls.n_starts; ++s) {
    std::vector<int> el = rng.sample_without_replacement(n, r + 1);
    std::sort(el.begin(), el.end());
    McdCandidate cand = evaluate_support(U, std::move(el));
    for (int c = 0; c < controls.initial_csteps; ++c)
      cand = concentration_step(U, cand, h);
    if (static_cast<int>(kept.size()) < controls.keep) {
      kept.push_back(std::move(cand));
      std::stable_sort(kept.begin(), kept.end(), better);
    } else if (better(cand, kept.back())) {
      kept.back() = std::move(cand);
      std::stable_sort(kept.begin(), kept.end(), better);
    }
  }
  if (kept.empty()) throw Error("mcd_estimate produced no candidates");

  // Iterate the kept candidates to convergence.
  McdCandidate best;
  bool have_best = false;
  bool any_repair = false;
  for (auto& cand : kept) {
    McdCandidate cur = cand;
    for (int it = 0; it < controls.max_csteps; ++it) {
      McdCandidate next = concentration_step(U, cur, h);
      any_repair = any_repair || next.repaired;
      if (next.support == cur.support) break;
      if (next.det >= cur.det - 1e-14 * std::max(1.0, std::abs(cur.det))) {
        if (next.det < cur.det) cur = std::move(next);
        break;
      }
      cur = std::move(next);
    }
    if (!have_best || better(cur, best)) {
      best = std::move(cur);
      have_best = true;
    }
  }

  McdEstimate est;
  est.location = best.mc.mean;
  est.det = best.det;
  est.support = best.support;
  SafeChol chol = safe_cholesky(best.mc.cov);
  est.repaired = chol.repaired || any_repair;
  est.scatter = best.mc.cov;
  if (chol.ridge > 0.0)
    est.scatter += chol.ridge * Matrix::Identity(r, r);
  return est;
}

Vector mahalanobis_distances(const Matrix& U, const Vector& location,
                             const Matrix& scatter) {
  if (U.cols() != location.size() || scatter.rows() != location.size() ||
      scatter.cols() != location.size())
    throw DimensionError("mahalanobis_distances shape mismatch");
  SafeChol chol = safe_cholesky(scatter);
  return squared_distances(U, location, chol).cwiseSqrt();
}

Vector scaled_outlyingness(const Vector& rd, int rank) {
  if (rd.size() == 0) throw Error("scaled_outlyingness requires distances");
  if (rank < 1) throw Error("scaled_outlyingness requires rank >= 1");
  const double med = median(rd);
  if (med <= 0.0)
    throw DegenerateDistanceError("median robust distance is zero");
  const double factor = std::sqrt(chi2_quantile(rank, 0.5)) / med;
  return rd * factor;
}

OutlyingnessReport groupwise_outlyingness(const CoefficientMatrix& B,
                                          const Matrix& X,
                                          const IntVector& labels, int K,
                                          Rng& rng, double h_fraction,
                                          const McdControls& controls) {
  const Index n = X.rows();
  if (labels.size() != n) throw DimensionError("label vector length mismatch");
  const Matrix Z = score_matrix(B, X);

  std::vector<std::vector<int>> groups(static_cast<std::size_t>(K));
  for (Index i = 0; i < n; ++i) {
    const int g = labels[i];
    if (g < 1 || g > K)
      throw InvalidLabelError("label " + std::to_string(g) + " at index " +
                              std::to_string(i));
    groups[static_cast<std::size_t>(g - 1)].push_back(static_cast<int>(i));
  }

  OutlyingnessReport report;
  report.rd = Vector::Zero(n);
  report.rd_scaled = Vector::Zero(n);
  report.group = labels;

  for (int l = 0; l < K; ++l) {
    const auto& rows = groups[static_cast<std::size_t>(l)];
    const int nl = static_cast<int>(rows.size());
    if (nl <= 2)
      throw Error("group " + std::to_string(l + 1) + " has " +
                  std::to_string(nl) + " observations; need more than 2");
    Matrix Zl(nl, K);
    for (int i = 0; i < nl; ++i) Zl.row(i) = Z.row(rows[static_cast<std::size_t>(i)]);

    const ReducedScores red = reduce_rank(Zl);
    if (red.rank == 0) continue;  // degenerate block: all distances stay zero

    const McdEstimate mcd = mcd_estimate(red.U, h_fraction, rng, controls);
    const Vector rd = mahalanobis_distances(red.U, mcd.location, mcd.scatter);
    Vector scaled;
    try {
      scaled = scaled_outlyingness(rd, red.rank);
    } catch (const DegenerateDistanceError&) {
      scaled = Vector::Zero(nl);  // zero-median fallback
    }
    for (int i = 0; i < nl; ++i) {
      report.rd[rows[static_cast<std::size_t>(i)]] = rd[i];
      report.rd_scaled[rows[static_cast<std::size_t>(i)]] = scaled[i];
    }
  }
  return report;
}

}  // namespace enetlts
