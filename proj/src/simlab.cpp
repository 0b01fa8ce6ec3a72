#include "enetlts/simlab.hpp"

#include "enetlts/parallel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace enetlts {

SimulationSetting make_setting(int id) {
  SimulationSetting s;
  s.id = id;
  switch (id) {
    case 1: s.p_a = 130; s.p_b = 30;  s.n = 500; break;
    case 2: s.p_a = 250; s.p_b = 250; s.n = 300; break;
    case 3: s.p_a = 50;  s.p_b = 100; s.n = 180; break;
    case 4: s.p_a = 5;   s.p_b = 50;  s.n = 180; break;
    case 5: s.p_a = 50;  s.p_b = 950; s.n = 180; break;
    default:
      throw Error("unknown simulation setting " + std::to_string(id));
  }
  s.p = s.p_a + s.p_b;

  s.group_means = Matrix::Zero(s.K, s.p);
  s.group_means(0, 0) = 3.0;  s.group_means(0, 1) = 3.0;
  s.group_means(1, 0) = 3.0;  s.group_means(1, 1) = -3.0;
  s.group_means(2, 0) = -3.0; s.group_means(2, 1) = -3.0;

  s.B_true = Matrix::Zero(s.p + 1, s.K);
  for (int j = 1; j <= s.p_a; ++j) {
    s.B_true(j, 0) = 0.5;
    s.B_true(j, 1) = (j % 2 == 1) ? 1.0 : -1.0;
    s.B_true(j, 2) = -1.0;
  }
  return s;
}

int sample_label(const Vector& probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (Index l = 0; l < probs.size(); ++l) {
    cum += probs[l];
    if (u < cum) return static_cast<int>(l) + 1;
  }
  return static_cast<int>(probs.size());
}

namespace {

// Lower Cholesky factor of the AR correlation matrix rho^|j-k|.
Matrix ar_cholesky(int dim, double rho) {
  Matrix C(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int k = 0; k < dim; ++k)
      C(j, k) = std::pow(rho, std::abs(j - k));
  Eigen::LLT<Matrix> llt(C);
  if (llt.info() != Eigen::Success)
    throw NumericError("block covariance is not positive definite");
  return llt.matrixL();
}

}  // namespace

Dataset generate(const SimulationSetting& setting, Rng& rng) {
  const int n = setting.n;
  const int p = setting.p;
  const Matrix La = ar_cholesky(setting.p_a, setting.rho_a);
  const Matrix Lb = setting.p_b > 0 ? ar_cholesky(setting.p_b, setting.rho_b)
                                    : Matrix();

  // Near-equal cluster sizes; the remainder goes to the last cluster.
  std::vector<int> cluster_of;
  cluster_of.reserve(static_cast<std::size_t>(n));
  const int base = n / setting.K;
  for (int g = 0; g < setting.K - 1; ++g)
    cluster_of.insert(cluster_of.end(), static_cast<std::size_t>(base), g);
  cluster_of.insert(cluster_of.end(),
                    static_cast<std::size_t>(n - base * (setting.K - 1)),
                    setting.K - 1);

  Matrix X(n, p);
  IntVector labels(n);
  Vector z(std::max(setting.p_a, setting.p_b));
  for (int i = 0; i < n; ++i) {
    const int g = cluster_of[static_cast<std::size_t>(i)];
    for (int j = 0; j < setting.p_a; ++j) z[j] = rng.normal();
    X.row(i).head(setting.p_a) =
        (La * z.head(setting.p_a)).transpose();
    if (setting.p_b > 0) {
      for (int j = 0; j < setting.p_b; ++j) z[j] = rng.normal();
      X.row(i).tail(setting.p_b) = (Lb * z.head(setting.p_b)).transpose();
    }
    X.row(i) += setting.group_means.row(g);

    const Matrix probs = predict_proba(setting.B_true, X.row(i));
    labels[i] = sample_label(probs.row(0), rng);
  }
  return Dataset::make(std::move(X), std::move(labels), setting.K);
}

std::vector<int> contaminate(Matrix& X, const SimulationSetting& setting,
                             const ContaminationSpec& spec, Rng& rng) {
  if (spec.epsilon < 0.0 || spec.epsilon >= 1.0)
    throw Error("contamination fraction must lie in [0, 1)");
  const int n_out =
      static_cast<int>(std::floor(spec.epsilon * static_cast<double>(X.rows())));
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(n_out));
  const int col_lo = 0;
  const int col_hi = spec.scenario == ContaminationScenario::informative_only
                         ? setting.p_a
                         : setting.p;
  for (int i = 0; i < n_out; ++i) {
    for (int j = col_lo; j < col_hi; ++j) X(i, j) = 10.0 + rng.normal();
    rows.push_back(i);
  }
  return rows;
}

double mcr(const IntVector& predicted, const IntVector& truth) {
  if (predicted.size() != truth.size())
    throw DimensionError("label vectors have different lengths");
  if (predicted.size() == 0) throw Error("mcr of empty vectors");
  int m = 0;
  for (Index i = 0; i < predicted.size(); ++i)
    if (predicted[i] != truth[i]) ++m;
  return static_cast<double>(m) / static_cast<double>(predicted.size());
}

CoefMetrics coef_metrics(const CoefficientMatrix& B_hat,
                         const CoefficientMatrix& B_true, int p_a, int p_b) {
  if (B_hat.rows() != B_true.rows() || B_hat.cols() != B_true.cols())
    throw DimensionError("coefficient matrices have different shapes");
  if (B_hat.rows() != p_a + p_b + 1)
    throw DimensionError("coefficient rows do not match p_a + p_b + 1");
  const int K = static_cast<int>(B_hat.cols());
  constexpr double kZeroTol = 1e-10;

  CoefMetrics m;
  m.precision_inf = std::sqrt(
      (B_hat.middleRows(1, p_a) - B_true.middleRows(1, p_a)).squaredNorm() /
      static_cast<double>(p_a * K));
  m.precision_uninf =
      p_b > 0 ? std::sqrt((B_hat.middleRows(1 + p_a, p_b) -
                           B_true.middleRows(1 + p_a, p_b))
                              .squaredNorm() /
                          static_cast<double>(p_b * K))
              : 0.0;

  int false_pos = 0;
  int false_neg = 0;
  for (int j = 1; j <= p_a + p_b; ++j) {
    for (int l = 0; l < K; ++l) {
      const bool hat_nonzero = std::abs(B_hat(j, l)) > kZeroTol;
      const bool true_nonzero = B_true(j, l) != 0.0;
      if (hat_nonzero && !true_nonzero) ++false_pos;
      if (!hat_nonzero && true_nonzero) ++false_neg;
    }
  }
  m.fpr = p_b > 0 ? static_cast<double>(false_pos) / (p_b * K) : 0.0;
  m.fnr = static_cast<double>(false_neg) / (p_a * K);
  return m;
}

ClassicalFit fit_classical_enet(const Dataset& data,
                                const EnetLtsConfig& config,
                                std::uint64_t seed) {
  config.validate();
  const Matrix Y = indicator_matrix(data.labels, data.K);

  std::vector<int> all_labels(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i)
    all_labels[static_cast<std::size_t>(i)] = data.labels[i];
  Rng fold_rng(derive_seed(seed, {seed_stage::kClassicalCv}));
  const std::vector<int> fold =
      stratified_folds(all_labels, config.folds, data.K, fold_rng);

  const int A = static_cast<int>(config.alpha_grid.size());
  const int L = static_cast<int>(config.lambda_grid.size());

  // Held-out deviance per observation and grid cell; folds fit along the
  // ascending lambda path with warm starts.
  std::vector<Matrix> dev(static_cast<std::size_t>(A));
  parallel_for(A, config.threads, [&](int a) {
    Matrix dev_a(data.n(), L);
    const double alpha = config.alpha_grid[static_cast<std::size_t>(a)];
    for (int f = 0; f < config.folds; ++f) {
      std::vector<int> train;
      std::vector<int> test;
      for (int i = 0; i < data.n(); ++i) {
        if (fold[static_cast<std::size_t>(i)] == f)
          test.push_back(i);
        else
          train.push_back(i);
      }
      const CoefficientMatrix* warm = nullptr;
      CoefficientMatrix prev;
      for (int l = 0; l < L; ++l) {
        const PenaltyParams params{alpha,
                                   config.lambda_grid[static_cast<std::size_t>(l)]};
        const SubsetState fitted =
            fit_subset_state(data, Y, train, params, warm, config.solver);
        prev = fitted.B;
        warm = &prev;
        for (int i : test) {
          const Vector d = deviances(fitted.B, data.X.row(i), Y.row(i));
          dev_a(i, l) = d[0];
        }
      }
    }
    dev[static_cast<std::size_t>(a)] = std::move(dev_a);
  });

  // Plain mean of the held-out deviances; ties prefer larger lambda then
  // larger alpha.
  double best_score = std::numeric_limits<double>::infinity();
  int best_a = 0, best_l = 0;
  for (int a = 0; a < A; ++a) {
    for (int l = 0; l < L; ++l) {
      const double score = dev[static_cast<std::size_t>(a)].col(l).mean();
      if (score < best_score ||
          (score == best_score &&
           (config.lambda_grid[static_cast<std::size_t>(l)] >
                config.lambda_grid[static_cast<std::size_t>(best_l)] ||
            (l == best_l && config.alpha_grid[static_cast<std::size_t>(a)] >
                                config.alpha_grid[static_cast<std::size_t>(best_a)])))) {
        best_score = score;
        best_a = a;
        best_l = l;
      }
    }
  }

  std::vector<int> all_rows(static_cast<std::size_t>(data.n()));
  for (int i = 0; i < data.n(); ++i) all_rows[static_cast<std::size_t>(i)] = i;
  const PenaltyParams params{config.alpha_grid[static_cast<std::size_t>(best_a)],
                             config.lambda_grid[static_cast<std::size_t>(best_l)]};
  const SubsetState final_fit =
      fit_subset_state(data, Y, all_rows, params, nullptr, config.solver);

  ClassicalFit fit;
  fit.alpha = params.alpha;
  fit.lambda = params.lambda;
  fit.B = final_fit.B;
  fit.converged = final_fit.fit_converged;
  return fit;
}

std::string method_name(Method m) {
  return m == Method::enetlts ? "enetlts" : "classical-enet";
}

std::string scenario_name(ContaminationScenario s) {
  return s == ContaminationScenario::informative_only ? "info" : "both";
}

namespace {

IntVector argmax_labels(const Matrix& P) {
  IntVector labels(P.rows());
  for (Index i = 0; i < P.rows(); ++i) {
    Index best = 0;
    P.row(i).maxCoeff(&best);
    labels[i] = static_cast<int>(best) + 1;
  }
  return labels;
}

}  // namespace

std::vector<MetricsRecord> run_study(const StudyConfig& config) {
  if (config.setting_ids.empty() || config.epsilons.empty() ||
      config.scenarios.empty() || config.methods.empty() || config.n_reps < 1)
    throw Error("study configuration is incomplete");
  for (Method m : config.methods)
    if (m != Method::enetlts && m != Method::classical_enet)
      throw Error("unknown method in study configuration");

  struct Task {
    int setting_id;
    double epsilon;
    ContaminationScenario scenario;
    int rep;
    std::uint64_t data_seed;
  };
  std::vector<Task> tasks;
  std::uint64_t combo = 0;
  for (int sid : config.setting_ids) {
    for (double eps : config.epsilons) {
      for (ContaminationScenario sc : config.scenarios) {
        for (int rep = 0; rep < config.n_reps; ++rep) {
          tasks.push_back({sid, eps, sc, rep,
                           derive_seed(config.seed,
                                       {seed_stage::kStudyRep, combo,
                                        static_cast<std::uint64_t>(rep)})});
        }
        ++combo;
      }
    }
  }

  const int n_methods = static_cast<int>(config.methods.size());
  std::vector<MetricsRecord> records(tasks.size() *
                                     static_cast<std::size_t>(n_methods));

  parallel_for(static_cast<int>(tasks.size()), config.threads, [&](int t) {
    const Task& task = tasks[static_cast<std::size_t>(t)];
    const SimulationSetting setting = make_setting(task.setting_id);

    for (int mi = 0; mi < n_methods; ++mi) {
      MetricsRecord& rec =
          records[static_cast<std::size_t>(t) * static_cast<std::size_t>(n_methods) +
                  static_cast<std::size_t>(mi)];
      rec.setting = task.setting_id;
      rec.epsilon = task.epsilon;
      rec.scenario = task.scenario;
      rec.method = config.methods[static_cast<std::size_t>(mi)];
      rec.rep = task.rep;
    }

    try {
      Rng data_rng(task.data_seed);
      Dataset train = generate(setting, data_rng);
      const ContaminationSpec spec{task.epsilon, task.scenario};
      contaminate(train.X, setting, spec, data_rng);
      train = Dataset::make(std::move(train.X), train.labels, setting.K);
      const Dataset test = generate(setting, data_rng);  // always clean

      for (int mi = 0; mi < n_methods; ++mi) {
        MetricsRecord& rec =
            records[static_cast<std::size_t>(t) * static_cast<std::size_t>(n_methods) +
                    static_cast<std::size_t>(mi)];
        try {
          EnetLtsConfig fit_config = config.fit;
          fit_config.threads = 1;  // replications carry the parallelism
          CoefficientMatrix B;
          if (rec.method == Method::enetlts) {
            fit_config.seed = derive_seed(task.data_seed, {1});
            const ModelFit fit = fit_enetlts(train, fit_config);
            B = fit.B_reweighted;
          } else {
            const ClassicalFit fit = fit_classical_enet(
                train, fit_config, derive_seed(task.data_seed, {2}));
            B = fit.B;
          }
          const IntVector pred = argmax_labels(predict_proba(B, test.X));
          rec.mcr = mcr(pred, test.labels);
          const CoefMetrics cm =
              coef_metrics(B, setting.B_true, setting.p_a, setting.p_b);
          rec.precision_inf = cm.precision_inf;
          rec.precision_uninf = cm.precision_uninf;
          rec.fpr = cm.fpr;
          rec.fnr = cm.fnr;
          rec.ok = true;
        } catch (const Error& e) {
          rec.ok = false;
          rec.error = e.what();
        }
      }
    } catch (const Error& e) {
      for (int mi = 0; mi < n_methods; ++mi) {
        MetricsRecord& rec =
            records[static_cast<std::size_t>(t) * static_cast<std::size_t>(n_methods) +
                    static_cast<std::size_t>(mi)];
        rec.ok = false;
        rec.error = std::string("data generation failed: ") + e.what();
      }
    }
  });

  // Reorder into (setting, epsilon, scenario, method, rep) key order.
  std::vector<MetricsRecord> ordered;
  ordered.reserve(records.size());
  std::size_t task_index = 0;
  for (std::size_t c = 0; c < tasks.size() / static_cast<std::size_t>(config.n_reps);
       ++c) {
    for (int mi = 0; mi < n_methods; ++mi) {
      for (int rep = 0; rep < config.n_reps; ++rep) {
        const std::size_t t = task_index + static_cast<std::size_t>(rep);
        ordered.push_back(records[t * static_cast<std::size_t>(n_methods) +
                                  static_cast<std::size_t>(mi)]);
      }
    }
    task_index += static_cast<std::size_t>(config.n_reps);
  }
  return ordered;
}

std::vector<AggregateRow> aggregate_records(
    const std::vector<MetricsRecord>& records) {
  std::vector<AggregateRow> rows;
  std::size_t i = 0;
  while (i < records.size()) {
    // Records arrive grouped by (setting, epsilon, scenario, method).
    std::size_t j = i;
    while (j < records.size() && records[j].setting == records[i].setting &&
           records[j].epsilon == records[i].epsilon &&
           records[j].scenario == records[i].scenario &&
           records[j].method == records[i].method)
      ++j;

    AggregateRow row;
    row.setting = records[i].setting;
    row.epsilon = records[i].epsilon;
    row.scenario = records[i].scenario;
    row.method = records[i].method;
    double sum[5] = {0, 0, 0, 0, 0};
    for (std::size_t k = i; k < j; ++k) {
      if (!records[k].ok) continue;
      ++row.reps_ok;
      sum[0] += records[k].mcr;
      sum[1] += records[k].precision_inf;
      sum[2] += records[k].precision_uninf;
      sum[3] += records[k].fpr;
      sum[4] += records[k].fnr;
    }
    if (row.reps_ok > 0)
      for (int m = 0; m < 5; ++m) row.mean[m] = sum[m] / row.reps_ok;
    if (row.reps_ok > 1) {
      double ss[5] = {0, 0, 0, 0, 0};
      for (std::size_t k = i; k < j; ++k) {
        if (!records[k].ok) continue;
        const double v[5] = {records[k].mcr, records[k].precision_inf,
                             records[k].precision_uninf, records[k].fpr,
                             records[k].fnr};
        for (int m = 0; m < 5; ++m)
          ss[m] += (v[m] - row.mean[m]) * (v[m] - row.mean[m]);
      }
      for (int m = 0; m < 5; ++m)
        row.se[m] = std::sqrt(ss[m] / (row.reps_ok - 1)) /
                    std::sqrt(static_cast<double>(row.reps_ok));
    }
    rows.push_back(row);
    i = j;
  }
  return rows;
}

}  // namespace enetlts
