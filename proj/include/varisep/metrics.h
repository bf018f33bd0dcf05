// include/varisep/metrics.h


// Copyright 2026  The varisep Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef VARISEP_METRICS_H_
#define VARISEP_METRICS_H_

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "varisep/assignment.h"
#include "varisep/signal.h"

namespace varisep {

// SI-SNR in dB. Both signals are made zero-mean, the estimate is projected
// onto the reference and the ratio of projected to residual energy is
// returned. No epsilon is added: a zero residual gives +inf, and a
// zero-energy reference or estimate (after mean removal) is an error.
double si_snr(std::span<const double> est, std::span<const double> ref);
double si_snr(const Signal &est, const Signal &ref);

/// SI-SNR together with its gradient with respect to `est`.
struct SiSnrGrad {
  double value = 0.0;
  std::vector<double> d_est;
};
SiSnrGrad si_snr_with_grad(std::span<const double> est,
                           std::span<const double> ref);

/// Matrix M with M(i, j) = si_snr(ests[i], refs[j]).
Eigen::MatrixXd pairwise_si_snr(std::span<const Signal> ests,
                                std::span<const Signal> refs);

/// Utterance-level PIT loss: -(best sum of SI-SNR over permutations).
/// Rows of the assignment are estimates, columns references.
struct PitResult {
  double loss = 0.0;
  Assignment assignment;
};
PitResult upit(std::span<const Signal> refs, std::span<const Signal> ests);

/// Best SI-SNR sum over injective pairings of the smaller list into the
/// larger one.
double l_match(std::span<const Signal> refs, std::span<const Signal> ests);

/// pref * |n_ref - n_est|.
double l_pad(int n_ref, int n_est, double pref_db);

/// One dataset term of the penalized SI-SNR:
/// (l_match + l_pad) / max(|refs|, |ests|).
double p_si_snr_example(std::span<const Signal> refs,
                        std::span<const Signal> ests, double pref_db);

/// The same term from an already computed matched sum.
double p_si_snr_term(double matched_sum, int n_ref, int n_est, double pref_db);

struct PrefPolicy {
  enum class Mode { kFixedDb, kOracleAverage };
  Mode mode = Mode::kFixedDb;
  double value_db = -30.0;

  static PrefPolicy Fixed(double db) { return {Mode::kFixedDb, db}; }
  static PrefPolicy OracleAverage() { return {Mode::kOracleAverage, 0.0}; }
};

struct SeparationExample {
  std::vector<Signal> refs;
  std::vector<Signal> ests;
};

struct ExampleResult {
  int true_count = 0;
  int pred_count = 0;
  double matched_si_snr = 0.0;  // sum over matched pairs
  double p_si_snr = 0.0;

  double mean_matched_si_snr() const {
    return matched_si_snr / std::min(true_count, pred_count);
  }
};

struct EvalReport {
  std::vector<ExampleResult> per_example;
  std::vector<std::vector<int>> confusion;  // [true-1][pred-1]
  std::vector<double> recall_per_class;     // NaN for classes with no examples
  double mean_oracle_si_snr = 0.0;
  double mean_p_si_snr = 0.0;
  PrefPolicy::Mode pref_mode = PrefPolicy::Mode::kFixedDb;
  double pref_db = -30.0;
};

/// Negated mean (over examples) of the per-example mean matched SI-SNR.
/// Every example must have as many estimates as references.
double oracle_pref(std::span<const SeparationExample> examples);

/// Scores one example: matched SI-SNR sum via l_match and the penalized term.
ExampleResult score_example(const SeparationExample &ex, double pref_db);

struct DatasetScore {
  double mean = 0.0;
  EvalReport report;
};

/// Dataset mean of p_si_snr_example. With the oracle-average policy the
/// penalty is oracle_pref over `oracle_examples` when given, otherwise over
/// the examples of `examples` whose counts match. Reductions run in index
/// order.
DatasetScore p_si_snr_dataset(
    std::span<const SeparationExample> examples, const PrefPolicy &policy,
    int max_speakers,
    std::optional<std::span<const SeparationExample>> oracle_examples = {});

/// Builds a report from per-example results already scored with pref_db.
EvalReport assemble_report(std::vector<ExampleResult> results, int max_speakers,
                           PrefPolicy::Mode mode, double pref_db);

/// Upper bound on P-SI-SNR for a system with counting accuracy a, oracle
/// SI-SNR x on k-speaker mixtures, assuming every miscount overestimates by
/// one channel: a*x + (1-a)*(k*x + pref)/(k+1).
double upper_bound(double a, double x_db, int k, double pref_db);

struct CountingStats {
  std::vector<std::vector<int>> confusion;
  std::vector<double> recall;
};
CountingStats counting_stats(std::span<const std::pair<int, int>> pairs,
                             int max_speakers);

/// JSON text for a report (see README for the schema).
std::string ReportToJson(const EvalReport &report, int indent = 2);

}  // namespace varisep

#endif  // VARISEP_METRICS_H_
