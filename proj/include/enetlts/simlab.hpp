// Simulation laboratory: block-correlated Gaussian three-group data,
// contamination scenarios, classification / coefficient-recovery metrics,
// and replication studies comparing the trimmed estimator against the
// plain cross-validated elastic net.

#pragma once

#include "enetlts/data_model.hpp"
#include "enetlts/enetlts.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace enetlts {

struct SimulationSetting {
  int id = 0;
  int p_a = 0;  // informative variables
  int p_b = 0;  // noise variables
  int p = 0;
  int n = 0;
  double rho_a = 0.5;
  double rho_b = 0.5;
  int K = 3;
  Matrix group_means;  // K x p
  CoefficientMatrix B_true;  // (p+1) x K, zero intercepts, zero noise block
};

// The five benchmark settings:
//   1: 130/30/160/500   2: 250/250/500/300   3: 50/100/150/180
//   4: 5/50/55/180      5: 50/950/1000/180
SimulationSetting make_setting(int id);

enum class ContaminationScenario { informative_only, both_blocks };

struct ContaminationSpec {
  double epsilon = 0.0;  // 0, 0.10 or 0.20
  ContaminationScenario scenario = ContaminationScenario::informative_only;
};

// Draws one label from a probability row.
int sample_label(const Vector& probs, Rng& rng);

// n observations split (near-)equally over the three mean clusters, each
// drawn from the block AR-correlation normal; the response label of every
// observation is drawn from the softmax probabilities at B_true.
Dataset generate(const SimulationSetting& setting, Rng& rng);

// Replaces the designated block of the first floor(epsilon * n) rows by
// N(10,1) draws, in place; labels are untouched. Returns the affected rows.
std::vector<int> contaminate(Matrix& X, const SimulationSetting& setting,
                             const ContaminationSpec& spec, Rng& rng);

// Misclassification rate m/n.
double mcr(const IntVector& predicted, const IntVector& truth);

struct CoefMetrics {
  double precision_inf = 0.0;    // RMS error over the informative slope block
  double precision_uninf = 0.0;  // RMS error over the noise slope block
  double fpr = 0.0;  // true-zero entries estimated nonzero / (p_b K)
  double fnr = 0.0;  // true-nonzero entries estimated zero / (p_a K)
};

// Slope rows 1..p_a are the informative block, p_a+1..p the noise block;
// |b| > 1e-10 counts as nonzero.
CoefMetrics coef_metrics(const CoefficientMatrix& B_hat,
                         const CoefficientMatrix& B_true, int p_a, int p_b);

// ---------------------------------------------------------------------------
// Classical comparator: elastic net multinomial fit tuned by plain-mean
// 5-fold CV over the same grids.

struct ClassicalFit {
  double alpha = 0.0;
  double lambda = 0.0;
  CoefficientMatrix B;  // original scale
  bool converged = true;
};

ClassicalFit fit_classical_enet(const Dataset& data,
                                const EnetLtsConfig& config,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Replication studies.

enum class Method { enetlts, classical_enet };

std::string method_name(Method m);
std::string scenario_name(ContaminationScenario s);

struct StudyConfig {
  std::vector<int> setting_ids;
  std::vector<double> epsilons;
  std::vector<ContaminationScenario> scenarios = {
      ContaminationScenario::informative_only,
      ContaminationScenario::both_blocks};
  std::vector<Method> methods = {Method::enetlts, Method::classical_enet};
  int n_reps = 1;
  std::uint64_t seed = 1;
  int threads = 1;
  EnetLtsConfig fit;  // grids and knobs shared by both methods
};

struct MetricsRecord {
  int setting = 0;
  double epsilon = 0.0;
  ContaminationScenario scenario = ContaminationScenario::informative_only;
  Method method = Method::enetlts;
  int rep = 0;
  double mcr = 0.0;
  double precision_inf = 0.0;
  double precision_uninf = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  bool ok = false;
  std::string error;
};

// One record per (setting, epsilon, scenario, method, replication), in that
// key order. Training data are contaminated per spec; test data are always
// clean. Per-replication failures are recorded and the study continues.
std::vector<MetricsRecord> run_study(const StudyConfig& config);

struct AggregateRow {
  int setting = 0;
  double epsilon = 0.0;
  ContaminationScenario scenario = ContaminationScenario::informative_only;
  Method method = Method::enetlts;
  int reps_ok = 0;
  double mean[5] = {0, 0, 0, 0, 0};  // mcr, prec_inf, prec_uninf, fpr, fnr
  double se[5] = {0, 0, 0, 0, 0};
};

std::vector<AggregateRow> aggregate_records(
    const std::vector<MetricsRecord>& records);

}  // namespace enetlts
