// Penalized multinomial likelihood machinery: probability model, elastic net
// penalty, proximal-gradient fitting, deviances, and optimality checks.
//
// The symmetric multinomial parametrization is over-complete; shifting any
// coefficient row by a constant leaves all class probabilities unchanged.
// The library fixes the gauge by constraining every row (intercepts and
// slopes) to sum to zero. fit_penalized optimizes within that subspace via a
// sum-constrained soft-threshold prox, and kkt_residual measures stationarity
// modulo the same per-row shift freedom.

#pragma once

#include "enetlts/types.hpp"

#include <vector>

namespace enetlts {

struct SolverControls {
  double kkt_tol = 1e-6;    // stationarity tolerance
  double obj_tol = 1e-10;   // relative objective-change tolerance
  int max_iter = 10000;
  bool record_trace = false;  // keep the per-iteration objective values
};

struct FitResult {
  CoefficientMatrix B;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  double kkt = 0.0;
  std::vector<double> trace;  // filled when record_trace is set
};

// Elastic net penalty over the slope rows only:
// (1-alpha)/2 * sum b^2 + alpha * sum |b|.
double penalty_value(const CoefficientMatrix& B, double alpha);

// Row-wise softmax of the linear scores, computed with max subtraction.
Matrix predict_proba(const CoefficientMatrix& B, const Matrix& X);

// Per-observation deviance -log p_hat(true class), clamped at 1e-300.
Vector deviances(const CoefficientMatrix& B, const Matrix& X, const Matrix& Y);

// Mean deviance over the subset plus lambda * penalty.
double objective_value(const Matrix& X, const Matrix& Y,
                       const CoefficientMatrix& B, const PenaltyParams& params,
                       const std::vector<int>& subset);

// Minimizes (1/n_w) sum_i w_i d_i(B) + lambda * P_alpha(B) over row-sum-zero
// coefficient matrices. Weights must be hard 0/1 with at least 2K ones and
// every class represented. Monotone proximal gradient descent with
// backtracking; warm-startable through init.
FitResult fit_penalized(const Matrix& X, const Matrix& Y,
                        const PenaltyParams& params, const Vector& weights,
                        const CoefficientMatrix* init = nullptr,
                        const SolverControls& controls = {});

// Same fit on an explicit row subset (unit weights on those rows).
FitResult fit_penalized_rows(const Matrix& X, const Matrix& Y,
                             const PenaltyParams& params,
                             const std::vector<int>& rows,
                             const CoefficientMatrix* init = nullptr,
                             const SolverControls& controls = {});

// Max over coordinates of the subgradient-condition violation, minimized
// over each row's free shift: for nonzero b, |g + lambda(1-alpha) b
// + lambda alpha sign(b) + mu|; for zero b, max(0, |g + mu| - lambda alpha);
// intercept coordinates use the plain gradient.
double kkt_residual(const Matrix& X, const Matrix& Y,
                    const CoefficientMatrix& B, const PenaltyParams& params,
                    const Vector& weights);

// Smallest lambda at which the zero-slope model is stationary:
// max |gradient at the intercept-only fit| / alpha, with the alpha=0 case
// mapped to a large multiple of the alpha=0.001 value.
double lambda_max(const Matrix& X, const Matrix& Y, const Vector& weights,
                  double alpha);

}  // namespace enetlts
