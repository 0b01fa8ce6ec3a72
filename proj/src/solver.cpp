#include "enetlts/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace enetlts {

namespace {

Matrix linear_scores(const CoefficientMatrix& B, const Matrix& X) {
  if (X.cols() != B.rows() - 1)
    throw DimensionError("X has " + std::to_string(X.cols()) +
                         " columns but coefficients expect " +
                         std::to_string(B.rows() - 1));
  Matrix S = X * B.bottomRows(B.rows() - 1);
  S.rowwise() += B.row(0);
  return S;
}

// Softmax probabilities and per-row negative log-likelihood terms from a
// score matrix; shared by value and gradient evaluations.
struct Likelihood {
  Matrix P;      // m x K probabilities
  double nll;    // mean over rows of -sum_l y log p
};

Likelihood likelihood(const Matrix& S, const Matrix& Y) {
  const Index m = S.rows();
  Likelihood out;
  const Vector rowmax = S.rowwise().maxCoeff();
  out.P = (S.colwise() - rowmax).array().exp();
  const Vector z = out.P.rowwise().sum();
  out.P.array().colwise() /= z.array();
  // d_i = log z_i + max_i - s_{i,true}
  const Vector strue = (S.array() * Y.array()).rowwise().sum();
  out.nll = (z.array().log() + rowmax.array() - strue.array()).sum() /
            static_cast<double>(m);
  return out;
}

double soft_threshold(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Prox of tau*||.||_1 restricted to the sum-zero hyperplane: returns
// b = ST(v - mu, tau) with mu solving sum_l b_l = 0. The sum is a
// nonincreasing piecewise-linear function of mu with breakpoints v_l +- tau,
// so the root is found by scanning the sorted breakpoints.
void sum_zero_soft_threshold(const double* v, double* b, int K, double tau) {
  if (tau <= 0.0) {
    double mean = 0.0;
    for (int l = 0; l < K; ++l) mean += v[l];
    mean /= K;
    for (int l = 0; l < K; ++l) b[l] = v[l] - mean;
    return;
  }
  std::vector<double> bp(static_cast<std::size_t>(2 * K));
  for (int l = 0; l < K; ++l) {
    bp[static_cast<std::size_t>(2 * l)] = v[l] - tau;
    bp[static_cast<std::size_t>(2 * l + 1)] = v[l] + tau;
  }
  std::sort(bp.begin(), bp.end());
  auto sum_at = [&](double mu) {
    double s = 0.0;
    for (int l = 0; l < K; ++l) s += soft_threshold(v[l] - mu, tau);
    return s;
  };
  // f(bp.front()) >= 0 >= f(bp.back()); locate the sign change.
  double mu = bp.back();
  double f_lo = sum_at(bp[0]);
  if (f_lo <= 0.0) {
    mu = bp[0];
  } else {
    for (std::size_t i = 1; i < bp.size(); ++i) {
      const double f_hi = sum_at(bp[i]);
      if (f_hi <= 0.0) {
        // Linear on [bp[i-1], bp[i]].
        mu = (f_lo == f_hi) ? bp[i]
                            : bp[i - 1] + f_lo * (bp[i] - bp[i - 1]) / (f_lo - f_hi);
        break;
      }
      f_lo = f_hi;
    }
  }
  for (int l = 0; l < K; ++l) b[l] = soft_threshold(v[l] - mu, tau);
}

// Prox step for a full coefficient matrix: intercept row is centered, slope
// rows pass through the sum-constrained soft threshold.
CoefficientMatrix prox_step(const Matrix& V, double tau) {
  const Index K = V.cols();
  CoefficientMatrix B(V.rows(), K);
  B.row(0) = V.row(0).array() - V.row(0).mean();
  std::vector<double> vrow(static_cast<std::size_t>(K)),
      brow(static_cast<std::size_t>(K));
  for (Index j = 1; j < V.rows(); ++j) {
    for (Index l = 0; l < K; ++l) vrow[static_cast<std::size_t>(l)] = V(j, l);
    sum_zero_soft_threshold(vrow.data(), brow.data(), static_cast<int>(K), tau);
    for (Index l = 0; l < K; ++l) B(j, l) = brow[static_cast<std::size_t>(l)];
  }
  return B;
}

// Worst stationarity violation of one slope row as a function of the row
// shift mu; convex piecewise linear.
double row_violation(const double* g, const double* b, int K, double ridge,
                     double l1, double mu) {
  double worst = 0.0;
  for (int l = 0; l < K; ++l) {
    double v;
    if (b[l] != 0.0) {
      v = std::abs(g[l] + ridge * b[l] + l1 * (b[l] > 0.0 ? 1.0 : -1.0) + mu);
    } else {
      v = std::max(0.0, std::abs(g[l] + mu) - l1);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

double row_residual_gauged(const double* g, const double* b, int K,
                           double ridge, double l1) {
  const double at_zero = row_violation(g, b, K, ridge, l1, 0.0);
  if (at_zero == 0.0) return 0.0;
  double bound = 1.0;
  for (int l = 0; l < K; ++l)
    bound = std::max(bound, std::abs(g[l]) + ridge * std::abs(b[l]) + l1);
  double lo = -bound, hi = bound;
  for (int iter = 0; iter < 120 && (hi - lo) > 1e-13 * bound; ++iter) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (row_violation(g, b, K, ridge, l1, m1) <=
        row_violation(g, b, K, ridge, l1, m2))
      hi = m2;
    else
      lo = m1;
  }
  const double at_opt = row_violation(g, b, K, ridge, l1, 0.5 * (lo + hi));
  return std::min(at_zero, at_opt);
}

// KKT residual from a precomputed mean-NLL gradient.
double kkt_from_gradient(const Matrix& G, const CoefficientMatrix& B,
                         const PenaltyParams& params) {
  const int K = static_cast<int>(B.cols());
  const double ridge = params.lambda * (1.0 - params.alpha);
  const double l1 = params.lambda * params.alpha;
  double resid = G.row(0).cwiseAbs().maxCoeff();
  std::vector<double> g(static_cast<std::size_t>(K)), b(static_cast<std::size_t>(K));
  for (Index j = 1; j < B.rows(); ++j) {
    for (int l = 0; l < K; ++l) {
      g[static_cast<std::size_t>(l)] = G(j, l);
      b[static_cast<std::size_t>(l)] = B(j, l);
    }
    resid = std::max(resid, row_residual_gauged(g.data(), b.data(), K, ridge, l1));
  }
  return resid;
}

struct GatherResult {
  Matrix X;
  Matrix Y;
};

GatherResult gather_rows(const Matrix& X, const Matrix& Y,
                         const std::vector<int>& rows) {
  GatherResult g;
  g.X.resize(static_cast<Index>(rows.size()), X.cols());
  g.Y.resize(static_cast<Index>(rows.size()), Y.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    g.X.row(static_cast<Index>(i)) = X.row(rows[i]);
    g.Y.row(static_cast<Index>(i)) = Y.row(rows[i]);
  }
  return g;
}

std::vector<int> selected_rows(const Vector& weights, int K) {
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(weights.size()));
  for (Index i = 0; i < weights.size(); ++i) {
    const double w = weights[i];
    if (w != 0.0 && w != 1.0)
      throw DegenerateWeightsError("weights must be 0 or 1, got " +
                                   std::to_string(w) + " at index " +
                                   std::to_string(i));
    if (w == 1.0) rows.push_back(static_cast<int>(i));
  }
  if (static_cast<int>(rows.size()) < 2 * K)
    throw DegenerateWeightsError("only " + std::to_string(rows.size()) +
                                 " nonzero weights; need at least " +
                                 std::to_string(2 * K));
  return rows;
}

void check_classes_present(const Matrix& Y, const std::vector<int>& rows) {
  Vector counts = Vector::Zero(Y.cols());
  for (int r : rows) counts += Y.row(r).transpose();
  for (Index l = 0; l < counts.size(); ++l)
    if (counts[l] < 1.0)
      throw DegenerateWeightsError("class " + std::to_string(l + 1) +
                                   " has no nonzero-weight observations");
}

// Largest eigenvalue of Xt~'Xt~/m for the augmented design [1 X], via power
// iteration; bounds the NLL Hessian together with the softmax factor 1/2.
double design_spectral_bound(const Matrix& X) {
  const Index m = X.rows();
  const Index p = X.cols();
  Vector v = Vector::Ones(p + 1);
  v /= v.norm();
  double lambda = 1.0;
  for (int it = 0; it < 12; ++it) {
    // w = Xt' (Xt v) with Xt = [1 X]
    Vector t = Vector::Constant(m, v[0]);
    if (p > 0) t += X * v.tail(p);
    Vector w(p + 1);
    w[0] = t.sum();
    if (p > 0) w.tail(p) = X.transpose() * t;
    const double norm = w.norm();
    if (norm <= 0.0) return 1.0;
    lambda = norm;
    v = w / norm;
  }
  return lambda / static_cast<double>(m);
}

FitResult fit_core(const Matrix& Xs, const Matrix& Ys,
                   const PenaltyParams& params,
                   const CoefficientMatrix* init,
                   const SolverControls& controls) {
  params.validate();
  const Index m = Xs.rows();
  const Index p = Xs.cols();
  const Index K = Ys.cols();
  const double ridge = params.lambda * (1.0 - params.alpha);
  const double l1 = params.lambda * params.alpha;

  CoefficientMatrix B;
  if (init != nullptr) {
    if (init->rows() != p + 1 || init->cols() != K)
      throw DimensionError("warm start has wrong shape");
    if (!init->allFinite()) throw NumericError("warm start is not finite");
    B = *init;
    // Project into the row-sum-zero gauge; probabilities are unchanged.
    B.colwise() -= B.rowwise().mean();
  } else {
    B = CoefficientMatrix::Zero(p + 1, K);
  }

  auto full_objective = [&](const CoefficientMatrix& Bc, double smooth) {
    return smooth + l1 * Bc.bottomRows(p).cwiseAbs().sum();
  };

  const double lipschitz = 0.5 * design_spectral_bound(Xs) + ridge;
  double step = 1.0 / std::max(lipschitz, 1e-12);
  const double max_step = 100.0 * step;

  Matrix S = linear_scores(B, Xs);
  Likelihood lk = likelihood(S, Ys);
  double smooth = lk.nll + 0.5 * ridge * B.bottomRows(p).squaredNorm();
  double objective = full_objective(B, smooth);

  FitResult result;
  if (controls.record_trace) result.trace.push_back(objective);

  int iter = 0;
  bool converged = false;
  int stall_count = 0;
  // Number of consecutive sub-tolerance objective changes accepted as
  // convergence when the stationarity tolerance is not reached first.
  constexpr int kStallLimit = 50;
  double kkt = std::numeric_limits<double>::infinity();
  for (; iter < controls.max_iter; ++iter) {
    // Mean-NLL gradient: [1 X]' (P - Y) / m.
    Matrix R = (lk.P - Ys) / static_cast<double>(m);
    Matrix G(p + 1, K);
    G.row(0) = R.colwise().sum();
    if (p > 0) G.bottomRows(p) = Xs.transpose() * R;

    kkt = kkt_from_gradient(G, B, params);
    if (kkt <= controls.kkt_tol) {
      converged = true;
      break;
    }

    Matrix grad = G;
    if (p > 0) grad.bottomRows(p) += ridge * B.bottomRows(p);

    // Backtracking on the quadratic majorization; guarantees monotone
    // descent of the full objective.
    CoefficientMatrix B_new;
    Matrix S_new;
    Likelihood lk_new;
    double smooth_new = 0.0;
    bool accepted = false;
    while (step > 1e-18) {
      B_new = prox_step(B - step * grad, step * l1);
      S_new = linear_scores(B_new, Xs);
      lk_new = likelihood(S_new, Ys);
      smooth_new = lk_new.nll + 0.5 * ridge * B_new.bottomRows(p).squaredNorm();
      const Matrix delta = B_new - B;
      const double bound = smooth + (grad.array() * delta.array()).sum() +
                           delta.squaredNorm() / (2.0 * step);
      if (smooth_new <= bound + 1e-12 * (1.0 + std::abs(bound))) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // step underflow: stalled

    const double objective_new = full_objective(B_new, smooth_new);
    const double change = objective - objective_new;
    B.swap(B_new);
    S.swap(S_new);
    lk = std::move(lk_new);
    smooth = smooth_new;
    objective = objective_new;
    if (controls.record_trace) result.trace.push_back(objective);
    step = std::min(step * 1.1, max_step);

    if (change <= controls.obj_tol * std::max(1.0, std::abs(objective))) {
      if (++stall_count >= kStallLimit) {
        Matrix R2 = (lk.P - Ys) / static_cast<double>(m);
        Matrix G2(p + 1, K);
        G2.row(0) = R2.colwise().sum();
        if (p > 0) G2.bottomRows(p) = Xs.transpose() * R2;
        kkt = kkt_from_gradient(G2, B, params);
        converged = true;
        ++iter;
        break;
      }
    } else {
      stall_count = 0;
    }
  }

  result.B = std::move(B);
  result.converged = converged;
  result.iterations = iter;
  result.objective = objective;
  result.kkt = kkt;
  return result;
}

}  // namespace

double penalty_value(const CoefficientMatrix& B, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error("alpha must lie in [0,1]");
  const auto s = B.bottomRows(B.rows() - 1);
  return 0.5 * (1.0 - alpha) * s.squaredNorm() + alpha * s.cwiseAbs().sum();
}

Matrix predict_proba(const CoefficientMatrix& B, const Matrix& X) {
  Matrix S = linear_scores(B, X);
  for (Index i = 0; i < S.rows(); ++i)
    if (!S.row(i).allFinite())
      throw NumericError("non-finite score in row " + std::to_string(i));
  const Vector rowmax = S.rowwise().maxCoeff();
  Matrix P = (S.colwise() - rowmax).array().exp();
  P.array().colwise() /= P.rowwise().sum().array();
  return P;
}

Vector deviances(const CoefficientMatrix& B, const Matrix& X, const Matrix& Y) {
  const Matrix P = predict_proba(B, X);
  if (Y.rows() != P.rows() || Y.cols() != P.cols())
    throw DimensionError("indicator matrix shape mismatch");
  const Vector ptrue = (P.array() * Y.array()).rowwise().sum();
  return (-ptrue.array().max(1e-300).log()).matrix();
}

double objective_value(const Matrix& X, const Matrix& Y,
                       const CoefficientMatrix& B, const PenaltyParams& params,
                       const std::vector<int>& subset) {
  if (subset.empty()) throw Error("objective_value requires a nonempty subset");
  const Vector d = deviances(B, X, Y);
  double sum = 0.0;
  for (int i : subset) sum += d[i];
  return sum / static_cast<double>(subset.size()) +
         params.lambda * penalty_value(B, params.alpha);
}

FitResult fit_penalized(const Matrix& X, const Matrix& Y,
                        const PenaltyParams& params, const Vector& weights,
                        const CoefficientMatrix* init,
                        const SolverControls& controls) {
  if (weights.size() != X.rows())
    throw DimensionError("weight vector length mismatch");
  const std::vector<int> rows = selected_rows(weights, static_cast<int>(Y.cols()));
  check_classes_present(Y, rows);
  const GatherResult g = gather_rows(X, Y, rows);
  return fit_core(g.X, g.Y, params, init, controls);
}

FitResult fit_penalized_rows(const Matrix& X, const Matrix& Y,
                             const PenaltyParams& params,
                             const std::vector<int>& rows,
                             const CoefficientMatrix* init,
                             const SolverControls& controls) {
  if (static_cast<Index>(rows.size()) > X.rows() || rows.empty())
    throw Error("invalid row subset");
  if (static_cast<int>(rows.size()) < 2 * static_cast<int>(Y.cols()))
    throw DegenerateWeightsError("subset of " + std::to_string(rows.size()) +
                                 " rows is too small; need at least " +
                                 std::to_string(2 * Y.cols()));
  check_classes_present(Y, rows);
  const GatherResult g = gather_rows(X, Y, rows);
  return fit_core(g.X, g.Y, params, init, controls);
}

double kkt_residual(const Matrix& X, const Matrix& Y,
                    const CoefficientMatrix& B, const PenaltyParams& params,
                    const Vector& weights) {
  params.validate();
  const std::vector<int> rows = selected_rows(weights, static_cast<int>(Y.cols()));
  const GatherResult g = gather_rows(X, Y, rows);
  const Index m = g.X.rows();
  const Index p = g.X.cols();
  const Matrix S = linear_scores(B, g.X);
  const Likelihood lk = likelihood(S, g.Y);
  Matrix R = (lk.P - g.Y) / static_cast<double>(m);
  Matrix G(p + 1, B.cols());
  G.row(0) = R.colwise().sum();
  if (p > 0) G.bottomRows(p) = g.X.transpose() * R;
  return kkt_from_gradient(G, B, params);
}

double lambda_max(const Matrix& X, const Matrix& Y, const Vector& weights,
                  double alpha) {
  const std::vector<int> rows = selected_rows(weights, static_cast<int>(Y.cols()));
  check_classes_present(Y, rows);
  const GatherResult g = gather_rows(X, Y, rows);
  const Index m = g.X.rows();
  // Null model: probabilities equal to the class proportions for every row.
  const Vector pi = g.Y.colwise().mean();
  Matrix R = ((-g.Y).rowwise() + pi.transpose()) / static_cast<double>(m);
  const Matrix Gslopes = g.X.transpose() * R;
  const double gmax = Gslopes.cwiseAbs().maxCoeff();
  const double alpha_floor = 1e-3;
  if (alpha >= alpha_floor) return gmax / alpha;
  return 1e3 * gmax / alpha_floor;
}

}  // namespace enetlts
