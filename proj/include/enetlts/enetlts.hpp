// Trimmed elastic net multinomial regression driver: elemental starts,
// concentration steps, warm-start tuning grid, trimmed cross-validation,
// and the reweighting step.
//
// All operations below expect the dataset to be globally standardized
// already (fit_enetlts does this once with robust_standardize). Coefficient
// matrices inside SubsetState live in that global frame; the per-subset
// classical standardization applied around every penalized fit is an
// internal detail of fit_subset_state.

#pragma once

#include "enetlts/data_model.hpp"
#include "enetlts/preprocess.hpp"
#include "enetlts/robust_scores.hpp"
#include "enetlts/solver.hpp"

#include <cstdint>
#include <vector>

namespace enetlts {

struct EnetLtsConfig {
  std::vector<double> alpha_grid = default_alpha_grid();
  std::vector<double> lambda_grid = default_lambda_grid();
  double h_fraction = 0.75;
  int folds = 5;
  double trim = 0.10;
  int n_starts = 500;
  int keep = 10;
  int max_csteps = 50;
  double c2 = 5.0;
  std::uint64_t seed = 1;
  int threads = 1;  // 0 = hardware concurrency
  SolverControls solver;
  McdControls mcd;

  // 41 equally spaced mixing values in [0,1].
  static std::vector<double> default_alpha_grid();
  // 0.05 to 0.95 in steps of 0.05.
  static std::vector<double> default_lambda_grid();

  void validate() const;
};

// h = floor((n+1) * fraction).
int subset_size(int n, double h_fraction);

struct SubsetState {
  std::vector<int> H;   // sorted, satisfies the group quota
  CoefficientMatrix B;  // global standardized frame
  double Q = 0.0;       // mean deviance over H + lambda * penalty
  bool fit_converged = true;
};

// Two random observations per group, without replacement: 2K indexes.
std::vector<int> elemental_subset(const Dataset& data, Rng& rng);

// Fits on the rows of H with classical standardization recomputed on H,
// then back-transforms into the global frame and evaluates Q on H.
SubsetState fit_subset_state(const Dataset& data, const Matrix& Y,
                             std::vector<int> H, const PenaltyParams& params,
                             const CoefficientMatrix* warm,
                             const SolverControls& controls);

// One concentration step: rank all observations by group-wise scaled robust
// distance under B_current (ties by smaller deviance, then smaller index),
// keep the quota-respecting best, refit warm-started at B_current.
SubsetState cstep(const Dataset& data, const Matrix& Y,
                  const CoefficientMatrix& B_current, const GroupQuota& quota,
                  const PenaltyParams& params, Rng& rng,
                  const EnetLtsConfig& config);

// Concentration steps until the objective stops decreasing by more than
// 1e-10, the subset repeats, or max_csteps is hit. Returns the best state
// visited; q_trace (when given) records the strictly decreasing objective.
SubsetState csteps_converge(const Dataset& data, const Matrix& Y,
                            const SubsetState& start, const GroupQuota& quota,
                            const PenaltyParams& params, Rng& rng,
                            const EnetLtsConfig& config,
                            std::vector<double>* q_trace = nullptr);

// Elemental-subset search: n_starts starts with two concentration steps
// each, the best `keep` iterated to convergence. Individual start failures
// are skipped and counted. Deterministic for a fixed seed at any thread
// budget.
SubsetState random_starts(const Dataset& data, const Matrix& Y,
                          const GroupQuota& quota, const PenaltyParams& params,
                          std::uint64_t seed, const EnetLtsConfig& config,
                          int* failed_starts = nullptr);

struct GridCell {
  double alpha = 0.0;
  double lambda = 0.0;
  SubsetState best;
  double cv_score = 0.0;
  bool scored = false;
};

// Solves the (alpha_min, lambda_min) cell by random starts; every other
// cell warm-starts from its predecessor in lambda, and the first cell of
// each alpha row from the first cell of the previous row. Returned
// alpha-major: cell index = a * |lambda_grid| + l.
std::vector<GridCell> warm_start_grid(const Dataset& data, const Matrix& Y,
                                      const GroupQuota& quota,
                                      const EnetLtsConfig& config,
                                      int* failed_starts = nullptr);

// Stratified k-fold CV on the cell's subset; held-out deviances pooled per
// group, the ceil(trim * count) largest dropped per group, and the group
// means averaged.
double trimmed_cv_score(const Dataset& data, const Matrix& Y,
                        const GridCell& cell, const EnetLtsConfig& config,
                        Rng& rng);

// Index of the scored cell with minimal cv_score; ties prefer larger
// lambda, then larger alpha.
int select_optimal(const std::vector<GridCell>& cells);

struct ReweightResult {
  Vector weights;       // hard 0/1 per observation
  int n_used = 0;       // number of weight-1 observations
  double lambda_upd = 0.0;
  CoefficientMatrix B;  // global standardized frame
  bool converged = true;
  bool lambda_boundary = false;
};

// Hard weights w = 1{scaled distance <= c2}; lambda re-tuned on the
// surviving observations by stratified trimmed CV at fixed alpha; weighted
// refit warm-started at the raw coefficients.
ReweightResult reweight(const Dataset& data, const Matrix& Y,
                        const CoefficientMatrix& B_raw,
                        const OutlyingnessReport& diagnostics, double alpha_opt,
                        const EnetLtsConfig& config, std::uint64_t seed);

struct ConvergenceInfo {
  bool raw_converged = true;
  bool reweighted_converged = true;
  int failed_starts = 0;
  bool lambda_boundary = false;      // lambda_opt at a grid end
  bool lambda_upd_boundary = false;  // lambda_upd at a grid end
  bool n_used_below_h = false;       // reweighting kept fewer than h rows
};

struct ModelFit {
  double alpha_opt = 0.0;
  double lambda_opt = 0.0;
  double lambda_upd = 0.0;
  double cv_score = 0.0;
  std::vector<int> H_opt;
  CoefficientMatrix B_raw;         // original scale
  CoefficientMatrix B_reweighted;  // original scale
  Vector weights;
  int n_used = 0;
  OutlyingnessReport diagnostics;  // at the raw fit
  ScalingInfo scaling;             // global robust standardization
  ConvergenceInfo convergence;
};

// Full pipeline: robust standardization, quota, warm-start grid, trimmed CV
// over all cells, optimal-cell refit, reweighting, diagnostics. Deterministic
// for a fixed seed at any thread budget.
ModelFit fit_enetlts(const Dataset& data, const EnetLtsConfig& config);

}  // namespace enetlts
