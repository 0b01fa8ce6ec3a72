#include "enetlts/enetlts.hpp"

#include "enetlts/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>

namespace enetlts {

std::vector<double> EnetLtsConfig::default_alpha_grid() {
  std::vector<double> g(41);
  for (int i = 0; i < 41; ++i) g[static_cast<std::size_t>(i)] = i / 40.0;
  return g;
}

std::vector<double> EnetLtsConfig::default_lambda_grid() {
  std::vector<double> g(19);
  for (int i = 0; i < 19; ++i) g[static_cast<std::size_t>(i)] = 0.05 * (i + 1);
  return g;
}

void EnetLtsConfig::validate() const {
  if (alpha_grid.empty() || lambda_grid.empty())
    throw Error("tuning grids must be nonempty");
  if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end()) ||
      !std::is_sorted(lambda_grid.begin(), lambda_grid.end()))
    throw Error("tuning grids must be sorted ascending");
  for (double a : alpha_grid)
    if (a < 0.0 || a > 1.0) throw Error("alpha grid values must lie in [0,1]");
  for (double l : lambda_grid)
    if (l < 0.0) throw Error("lambda grid values must be nonnegative");
  if (!(h_fraction > 0.5 && h_fraction <= 1.0))
    throw Error("h_fraction must lie in (0.5, 1]");
  if (folds < 2) throw Error("fold count must be at least 2");
  if (trim < 0.0 || trim >= 0.5) throw Error("trim must lie in [0, 0.5)");
  if (n_starts < 1 || keep < 1) throw Error("n_starts and keep must be positive");
  if (max_csteps < 1) throw Error("max_csteps must be positive");
  if (!(c2 > 0.0)) throw Error("c2 must be positive");
}

int subset_size(int n, double h_fraction) {
  return static_cast<int>(std::floor((n + 1) * h_fraction));
}

std::vector<int> elemental_subset(const Dataset& data, Rng& rng) {
  std::vector<int> H;
  H.reserve(static_cast<std::size_t>(2 * data.K));
  for (int l = 0; l < data.K; ++l) {
    const auto& idx = data.group_indexes[static_cast<std::size_t>(l)];
    if (idx.size() < 2)
      throw Error("group " + std::to_string(l + 1) +
                  " has fewer than 2 observations");
    const std::vector<int> pick =
        rng.sample_without_replacement(static_cast<int>(idx.size()), 2);
    H.push_back(idx[static_cast<std::size_t>(pick[0])]);
    H.push_back(idx[static_cast<std::size_t>(pick[1])]);
  }
  std::sort(H.begin(), H.end());
  return H;
}

SubsetState fit_subset_state(const Dataset& data, const Matrix& Y,
                             std::vector<int> H, const PenaltyParams& params,
                             const CoefficientMatrix* warm,
                             const SolverControls& controls) {
  auto [X_sub, scaling] = subset_standardize(data.X, H);
  CoefficientMatrix warm_sub;
  const CoefficientMatrix* init = nullptr;
  if (warm != nullptr) {
    warm_sub = forward_transform(*warm, scaling);
    init = &warm_sub;
  }
  FitResult fit = fit_penalized_rows(X_sub, Y, params, H, init, controls);

  SubsetState state;
  state.B = backtransform(fit.B, scaling);
  state.fit_converged = fit.converged;
  state.Q = objective_value(data.X, Y, state.B, params, H);
  state.H = std::move(H);
  return state;
}

namespace {

// Quota-respecting selection: per group the h_l smallest scaled distances,
// ties by smaller deviance then smaller index.
std::vector<int> select_by_quota(const Vector& rd_scaled, const Vector& dev,
                                 const Dataset& data, const GroupQuota& quota) {
  std::vector<int> H;
  H.reserve(static_cast<std::size_t>(quota.h));
  for (int l = 0; l < data.K; ++l) {
    std::vector<int> idx = data.group_indexes[static_cast<std::size_t>(l)];
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      if (rd_scaled[a] != rd_scaled[b]) return rd_scaled[a] < rd_scaled[b];
      if (dev[a] != dev[b]) return dev[a] < dev[b];
      return a < b;
    });
    const int hl = quota.per_group[static_cast<std::size_t>(l)];
    H.insert(H.end(), idx.begin(), idx.begin() + hl);
  }
  std::sort(H.begin(), H.end());
  return H;
}

void check_quota(const std::vector<int>& H, const Dataset& data,
                 const GroupQuota& quota) {
  std::vector<int> counts(static_cast<std::size_t>(data.K), 0);
  for (int i : H) counts[static_cast<std::size_t>(data.labels[i] - 1)]++;
  for (int l = 0; l < data.K; ++l)
    if (counts[static_cast<std::size_t>(l)] !=
        quota.per_group[static_cast<std::size_t>(l)])
      throw Error("subset violates the group quota for group " +
                  std::to_string(l + 1));
}

}  // namespace

SubsetState cstep(const Dataset& data, const Matrix& Y,
                  const CoefficientMatrix& B_current, const GroupQuota& quota,
                  const PenaltyParams& params, Rng& rng,
                  const EnetLtsConfig& config) {
  const OutlyingnessReport report =
      groupwise_outlyingness(B_current, data.X, data.labels, data.K, rng,
                             config.h_fraction, config.mcd);
  const Vector dev = deviances(B_current, data.X, Y);
  std::vector<int> H = select_by_quota(report.rd_scaled, dev, data, quota);
  check_quota(H, data, quota);
  return fit_subset_state(data, Y, std::move(H), params, &B_current,
                          config.solver);
}

SubsetState csteps_converge(const Dataset& data, const Matrix& Y,
                            const SubsetState& start, const GroupQuota& quota,
                            const PenaltyParams& params, Rng& rng,
                            const EnetLtsConfig& config,
                            std::vector<double>* q_trace) {
  SubsetState best = start;
  if (q_trace != nullptr) {
    q_trace->clear();
    q_trace->push_back(best.Q);
  }
  std::set<std::vector<int>> visited;
  visited.insert(best.H);
  for (int it = 0; it < config.max_csteps; ++it) {
    SubsetState next = cstep(data, Y, best.B, quota, params, rng, config);
    if (!(next.Q < best.Q - 1e-10)) break;
    best = std::move(next);
    if (q_trace != nullptr) q_trace->push_back(best.Q);
    if (!visited.insert(best.H).second) break;  // subset repeated
  }
  return best;
}

SubsetState random_starts(const Dataset& data, const Matrix& Y,
                          const GroupQuota& quota, const PenaltyParams& params,
                          std::uint64_t seed, const EnetLtsConfig& config,
                          int* failed_starts) {
  const int n_starts = config.n_starts;
  std::vector<std::optional<SubsetState>> results(
      static_cast<std::size_t>(n_starts));

  parallel_for(n_starts, config.threads, [&](int s) {
    Rng rng(derive_seed(seed, {seed_stage::kRandomStart,
                               static_cast<std::uint64_t>(s)}));
    try {
      const std::vector<int> elem = elemental_subset(data, rng);
      SubsetState st =
          fit_subset_state(data, Y, elem, params, nullptr, config.solver);
      // Initial h-subset from the elemental fit's distances.
      const OutlyingnessReport report =
          groupwise_outlyingness(st.B, data.X, data.labels, data.K, rng,
                                 config.h_fraction, config.mcd);
      const Vector dev = deviances(st.B, data.X, Y);
      std::vector<int> H0 = select_by_quota(report.rd_scaled, dev, data, quota);
      SubsetState cur =
          fit_subset_state(data, Y, std::move(H0), params, &st.B, config.solver);
      for (int c = 0; c < 2; ++c)
        cur = cstep(data, Y, cur.B, quota, params, rng, config);
      results[static_cast<std::size_t>(s)] = std::move(cur);
    } catch (const Error&) {
      // Singular or otherwise failed start: skip and count.
    }
  });

  std::vector<int> order;
  int failures = 0;
  for (int s = 0; s < n_starts; ++s) {
    if (results[static_cast<std::size_t>(s)].has_value())
      order.push_back(s);
    else
      ++failures;
  }
  if (failed_starts != nullptr) *failed_starts = failures;
  if (order.empty()) throw Error("all " + std::to_string(n_starts) +
                                 " random starts failed");
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return results[static_cast<std::size_t>(a)]->Q <
           results[static_cast<std::size_t>(b)]->Q;
  });
  const int n_keep = std::min<int>(config.keep, static_cast<int>(order.size()));

  std::vector<SubsetState> finals(static_cast<std::size_t>(n_keep));
  parallel_for(n_keep, config.threads, [&](int k) {
    Rng rng(derive_seed(seed, {seed_stage::kKeepConverge,
                               static_cast<std::uint64_t>(k)}));
    finals[static_cast<std::size_t>(k)] = csteps_converge(
        data, Y, *results[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])],
        quota, params, rng, config);
  });

  int best = 0;
  for (int k = 1; k < n_keep; ++k)
    if (finals[static_cast<std::size_t>(k)].Q < finals[static_cast<std::size_t>(best)].Q)
      best = k;
  return finals[static_cast<std::size_t>(best)];
}

namespace {

// Warm start in a neighboring grid cell: refit on the neighbor's subset at
// the new penalty, then run concentration steps to convergence.
SubsetState solve_from_neighbor(const Dataset& data, const Matrix& Y,
                                const GroupQuota& quota,
                                const SubsetState& neighbor,
                                const PenaltyParams& params, Rng& rng,
                                const EnetLtsConfig& config) {
  SubsetState start = fit_subset_state(data, Y, neighbor.H, params,
                                       &neighbor.B, config.solver);
  return csteps_converge(data, Y, start, quota, params, rng, config);
}

}  // namespace

std::vector<GridCell> warm_start_grid(const Dataset& data, const Matrix& Y,
                                      const GroupQuota& quota,
                                      const EnetLtsConfig& config,
                                      int* failed_starts) {
  const int A = static_cast<int>(config.alpha_grid.size());
  const int L = static_cast<int>(config.lambda_grid.size());
  std::vector<GridCell> cells(static_cast<std::size_t>(A * L));
  for (int a = 0; a < A; ++a)
    for (int l = 0; l < L; ++l) {
      GridCell& c = cells[static_cast<std::size_t>(a * L + l)];
      c.alpha = config.alpha_grid[static_cast<std::size_t>(a)];
      c.lambda = config.lambda_grid[static_cast<std::size_t>(l)];
    }

  auto cell_rng = [&](int a, int l) {
    return Rng(derive_seed(config.seed, {seed_stage::kGridCell,
                                         static_cast<std::uint64_t>(a),
                                         static_cast<std::uint64_t>(l)}));
  };

  // First column: the smallest-alpha, smallest-lambda cell is solved from
  // elemental subsets; each later alpha row inherits from the previous one.
  {
    GridCell& c0 = cells[0];
    c0.best = random_starts(
        data, Y, quota, {c0.alpha, c0.lambda},
        derive_seed(config.seed, {seed_stage::kGridCell, 0, 0}), config,
        failed_starts);
  }
  for (int a = 1; a < A; ++a) {
    GridCell& c = cells[static_cast<std::size_t>(a * L)];
    Rng rng = cell_rng(a, 0);
    c.best = solve_from_neighbor(data, Y, quota,
                                 cells[static_cast<std::size_t>((a - 1) * L)].best,
                                 {c.alpha, c.lambda}, rng, config);
  }
  // Rows are independent once their first cell is known.
  parallel_for(A, config.threads, [&](int a) {
    for (int l = 1; l < L; ++l) {
      GridCell& c = cells[static_cast<std::size_t>(a * L + l)];
      Rng rng = cell_rng(a, l);
      c.best = solve_from_neighbor(
          data, Y, quota, cells[static_cast<std::size_t>(a * L + l - 1)].best,
          {c.alpha, c.lambda}, rng, config);
    }
  });
  return cells;
}

namespace {

// Mean over groups of per-group means after dropping the ceil(trim * count)
// largest deviances in each group.
double trimmed_group_mean(const Vector& dev, const std::vector<int>& labels,
                          int K, double trim) {
  std::vector<std::vector<double>> by_group(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_group[static_cast<std::size_t>(labels[i] - 1)].push_back(
        dev[static_cast<Index>(i)]);
  double total = 0.0;
  int groups_used = 0;
  for (auto& g : by_group) {
    if (g.empty()) continue;
    std::sort(g.begin(), g.end());
    int drop = trim > 0.0
                   ? static_cast<int>(std::ceil(trim * static_cast<double>(g.size())))
                   : 0;
    drop = std::min<int>(drop, static_cast<int>(g.size()) - 1);
    double sum = 0.0;
    const int kept = static_cast<int>(g.size()) - drop;
    for (int i = 0; i < kept; ++i) sum += g[static_cast<std::size_t>(i)];
    total += sum / kept;
    ++groups_used;
  }
  return total / groups_used;
}

}  // namespace

double trimmed_cv_score(const Dataset& data, const Matrix& Y,
                        const GridCell& cell, const EnetLtsConfig& config,
                        Rng& rng) {
  const std::vector<int>& H = cell.best.H;
  std::vector<int> labels_H(H.size());
  for (std::size_t i = 0; i < H.size(); ++i)
    labels_H[i] = data.labels[H[static_cast<std::size_t>(i)]];

  const std::vector<int> fold =
      stratified_folds(labels_H, config.folds, data.K, rng);
  const PenaltyParams params{cell.alpha, cell.lambda};

  Vector held_dev(static_cast<Index>(H.size()));
  for (int f = 0; f < config.folds; ++f) {
    std::vector<int> train;
    std::vector<int> test_pos;
    for (std::size_t i = 0; i < H.size(); ++i) {
      if (fold[i] == f)
        test_pos.push_back(static_cast<int>(i));
      else
        train.push_back(H[i]);
    }
    const SubsetState fitted = fit_subset_state(data, Y, std::move(train),
                                                params, &cell.best.B,
                                                config.solver);
    for (int i : test_pos) {
      const int row = H[static_cast<std::size_t>(i)];
      const Vector d = deviances(fitted.B, data.X.row(row), Y.row(row));
      held_dev[i] = d[0];
    }
  }
  return trimmed_group_mean(held_dev, labels_H, data.K, config.trim);
}

int select_optimal(const std::vector<GridCell>& cells) {
  if (cells.empty()) throw Error("empty tuning grid");
  int best = -1;
  for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
    const GridCell& c = cells[static_cast<std::size_t>(i)];
    if (!c.scored) throw Error("select_optimal requires all cells scored");
    if (best < 0) {
      best = i;
      continue;
    }
    const GridCell& b = cells[static_cast<std::size_t>(best)];
    if (c.cv_score < b.cv_score ||
        (c.cv_score == b.cv_score &&
         (c.lambda > b.lambda || (c.lambda == b.lambda && c.alpha > b.alpha))))
      best = i;
  }
  return best;
}

ReweightResult reweight(const Dataset& data, const Matrix& Y,
                        const CoefficientMatrix& B_raw,
                        const OutlyingnessReport& diagnostics, double alpha_opt,
                        const EnetLtsConfig& config, std::uint64_t seed) {
  const int n = data.n();
  ReweightResult out;
  out.weights = Vector::Zero(n);
  std::vector<int> survivors;
  for (int i = 0; i < n; ++i) {
    if (diagnostics.rd_scaled[i] <= config.c2) {
      out.weights[i] = 1.0;
      survivors.push_back(i);
    }
  }
  out.n_used = static_cast<int>(survivors.size());
  if (out.n_used < 2 * data.K)
    throw Error("only " + std::to_string(out.n_used) +
                " observations survive reweighting; need at least " +
                std::to_string(2 * data.K));

  // Re-tune lambda on the survivors at fixed alpha by stratified trimmed CV,
  // warm-starting each fold along the ascending lambda path.
  std::vector<int> labels_s(survivors.size());
  for (std::size_t i = 0; i < survivors.size(); ++i)
    labels_s[i] = data.labels[survivors[i]];
  Rng fold_rng(derive_seed(seed, {seed_stage::kReweight, 0}));
  const std::vector<int> fold =
      stratified_folds(labels_s, config.folds, data.K, fold_rng);

  const int L = static_cast<int>(config.lambda_grid.size());
  Matrix dev_by_lambda(static_cast<Index>(survivors.size()), L);
  for (int f = 0; f < config.folds; ++f) {
    std::vector<int> train;
    std::vector<int> test_pos;
    for (std::size_t i = 0; i < survivors.size(); ++i) {
      if (fold[i] == f)
        test_pos.push_back(static_cast<int>(i));
      else
        train.push_back(survivors[i]);
    }
    CoefficientMatrix warm = B_raw;
    for (int l = 0; l < L; ++l) {
      const PenaltyParams params{alpha_opt,
                                 config.lambda_grid[static_cast<std::size_t>(l)]};
      const SubsetState fitted =
          fit_subset_state(data, Y, train, params, &warm, config.solver);
      warm = fitted.B;
      for (int i : test_pos) {
        const int row = survivors[static_cast<std::size_t>(i)];
        const Vector d = deviances(fitted.B, data.X.row(row), Y.row(row));
        dev_by_lambda(i, l) = d[0];
      }
    }
  }

  int best_l = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (int l = 0; l < L; ++l) {
    const double score =
        trimmed_group_mean(dev_by_lambda.col(l), labels_s, data.K, config.trim);
    if (score <= best_score) {  // ascending grid, so ties go to larger lambda
      best_score = score;
      best_l = l;
    }
  }
  out.lambda_upd = config.lambda_grid[static_cast<std::size_t>(best_l)];
  out.lambda_boundary = (L > 1) && (best_l == 0 || best_l == L - 1);

  const SubsetState final_fit = fit_subset_state(
      data, Y, survivors, {alpha_opt, out.lambda_upd}, &B_raw, config.solver);
  out.B = final_fit.B;
  out.converged = final_fit.fit_converged;
  return out;
}

ModelFit fit_enetlts(const Dataset& data, const EnetLtsConfig& config) {
  config.validate();

  auto [X_std, scaling] = robust_standardize(data.X);
  const Dataset std_data = Dataset::make(std::move(X_std), data.labels, data.K);
  const Matrix Y = indicator_matrix(data.labels, data.K);

  const int h = subset_size(data.n(), config.h_fraction);
  const GroupQuota quota = stratified_sizes(data.group_counts, h);

  std::vector<GridCell> cells;
  int failed_starts = 0;
  try {
    cells = warm_start_grid(std_data, Y, quota, config, &failed_starts);
  } catch (const Error& e) {
    throw Error(std::string("warm-start grid failed: ") + e.what());
  }

  const int n_cells = static_cast<int>(cells.size());
  std::vector<std::string> cell_errors(static_cast<std::size_t>(n_cells));
  parallel_for(n_cells, config.threads, [&](int i) {
    GridCell& c = cells[static_cast<std::size_t>(i)];
    Rng rng(derive_seed(config.seed,
                        {seed_stage::kCvFolds, static_cast<std::uint64_t>(i)}));
    try {
      c.cv_score = trimmed_cv_score(std_data, Y, c, config, rng);
      c.scored = true;
    } catch (const Error& e) {
      cell_errors[static_cast<std::size_t>(i)] = e.what();
    }
  });
  for (int i = 0; i < n_cells; ++i) {
    if (!cell_errors[static_cast<std::size_t>(i)].empty())
      throw Error("grid cell (alpha=" +
                  std::to_string(cells[static_cast<std::size_t>(i)].alpha) +
                  ", lambda=" +
                  std::to_string(cells[static_cast<std::size_t>(i)].lambda) +
                  "): " + cell_errors[static_cast<std::size_t>(i)]);
  }

  const int opt = select_optimal(cells);
  const GridCell& cell_opt = cells[static_cast<std::size_t>(opt)];
  const PenaltyParams params_opt{cell_opt.alpha, cell_opt.lambda};

  // Final refit on the optimal subset at the winning penalty.
  const SubsetState raw_state =
      fit_subset_state(std_data, Y, cell_opt.best.H, params_opt,
                       &cell_opt.best.B, config.solver);

  Rng diag_rng(derive_seed(config.seed, {seed_stage::kDiagnostics}));
  OutlyingnessReport diagnostics =
      groupwise_outlyingness(raw_state.B, std_data.X, std_data.labels,
                             std_data.K, diag_rng, config.h_fraction,
                             config.mcd);

  ReweightResult rew;
  try {
    rew = reweight(std_data, Y, raw_state.B, diagnostics, cell_opt.alpha,
                   config, derive_seed(config.seed, {seed_stage::kReweight}));
  } catch (const Error& e) {
    throw Error(std::string("reweighting stage failed: ") + e.what());
  }

  ModelFit fit;
  fit.alpha_opt = cell_opt.alpha;
  fit.lambda_opt = cell_opt.lambda;
  fit.lambda_upd = rew.lambda_upd;
  fit.cv_score = cell_opt.cv_score;
  fit.H_opt = raw_state.H;
  fit.B_raw = backtransform(raw_state.B, scaling);
  fit.B_reweighted = backtransform(rew.B, scaling);
  fit.weights = rew.weights;
  fit.n_used = rew.n_used;
  fit.diagnostics = std::move(diagnostics);
  fit.scaling = scaling;
  fit.convergence.raw_converged = raw_state.fit_converged;
  fit.convergence.reweighted_converged = rew.converged;
  fit.convergence.failed_starts = failed_starts;
  fit.convergence.lambda_upd_boundary = rew.lambda_boundary;
  fit.convergence.n_used_below_h = rew.n_used < h;
  {
    const int L = static_cast<int>(config.lambda_grid.size());
    const int l_idx = opt % L;
    fit.convergence.lambda_boundary = (L > 1) && (l_idx == 0 || l_idx == L - 1);
  }
  return fit;
}

}  // namespace enetlts
