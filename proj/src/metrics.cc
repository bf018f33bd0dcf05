// src/metrics.cc


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

#include "varisep/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "varisep/error.h"

namespace varisep {

namespace {

constexpr double kDbPerNeper = 10.0 / 2.302585092994045684;  // 10 / ln(10)

struct Centered {
  std::vector<double> est, ref;
  double dot = 0.0, ref_energy = 0.0, est_energy = 0.0;
};

Centered Center(std::span<const double> est, std::span<const double> ref) {
  if (est.size() != ref.size())
    Fail(ErrorCode::kLengthMismatch,
         "si_snr length mismatch: " + std::to_string(est.size()) + " vs " +
             std::to_string(ref.size()));
  if (est.empty()) Fail(ErrorCode::kEmptyInput, "si_snr of empty signals");
  Centered c;
  const double n = static_cast<double>(est.size());
  const double est_mean = std::accumulate(est.begin(), est.end(), 0.0) / n;
  const double ref_mean = std::accumulate(ref.begin(), ref.end(), 0.0) / n;
  c.est.resize(est.size());
  c.ref.resize(ref.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    c.est[i] = est[i] - est_mean;
    c.ref[i] = ref[i] - ref_mean;
    c.dot += c.est[i] * c.ref[i];
    c.ref_energy += c.ref[i] * c.ref[i];
    c.est_energy += c.est[i] * c.est[i];
  }
  if (c.ref_energy == 0.0)
    Fail(ErrorCode::kZeroEnergy, "si_snr reference has zero energy");
  if (c.est_energy == 0.0)
    Fail(ErrorCode::kZeroEnergy, "si_snr estimate has zero energy");
  return c;
}

}  // namespace

double si_snr(std::span<const double> est, std::span<const double> ref) {
  const Centered c = Center(est, ref);
  const double scale = c.dot / c.ref_energy;
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < c.est.size(); ++i) {
    const double t = scale * c.ref[i];
    const double e = c.est[i] - t;
    target += t * t;
    noise += e * e;
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(target / noise);
}

double si_snr(const Signal &est, const Signal &ref) {
  return si_snr(est.view(), ref.view());
}

SiSnrGrad si_snr_with_grad(std::span<const double> est,
                           std::span<const double> ref) {
  const Centered c = Center(est, ref);
  const double scale = c.dot / c.ref_energy;
  std::vector<double> residual(c.est.size());
  double target = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < c.est.size(); ++i) {
    const double t = scale * c.ref[i];
    residual[i] = c.est[i] - t;
    target += t * t;
    noise += residual[i] * residual[i];
  }
  if (noise == 0.0 || c.dot == 0.0)
    Fail(ErrorCode::kNonFinite, "si_snr gradient is undefined at this point");
  SiSnrGrad g;
  g.value = 10.0 * std::log10(target / noise);
  // d/d est of 10 log10(<e,r>^2 / (|r|^2 |n|^2)) with e, r centered. Both
  // terms are already zero-mean, so the centering Jacobian is the identity
  // on them.
  g.d_est.resize(c.est.size());
  for (std::size_t i = 0; i < c.est.size(); ++i)
    g.d_est[i] =
        kDbPerNeper * (2.0 * c.ref[i] / c.dot - 2.0 * residual[i] / noise);
  return g;
}

Eigen::MatrixXd pairwise_si_snr(std::span<const Signal> ests,
                                std::span<const Signal> refs) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(ests.size()),
                    static_cast<Eigen::Index>(refs.size()));
  for (std::size_t i = 0; i < ests.size(); ++i)
    for (std::size_t j = 0; j < refs.size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          si_snr(ests[i], refs[j]);
  return m;
}

namespace {

// Assignment that tolerates +inf entries (perfect reconstructions): those
// pairs are forced first, then the rest is solved on finite scores.
Assignment MatchScores(const Eigen::MatrixXd &m) {
  if (m.allFinite()) return solve_assignment(m);
  if (m.hasNaN()) Fail(ErrorCode::kNonFinite, "NaN in SI-SNR matrix");
  // Replace +inf by a value larger than any finite achievable total so the
  // solver prefers them, then restore the true score.
  double finite_max = 0.0;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (std::isfinite(m(i))) finite_max = std::max(finite_max, std::abs(m(i)));
  const double big = (finite_max + 1.0) * static_cast<double>(m.size() + 1);
  Eigen::MatrixXd capped = m;
  for (Eigen::Index i = 0; i < capped.size(); ++i)
    if (!std::isfinite(capped(i))) capped(i) = big;
  Assignment a = solve_assignment(capped);
  a.score = 0.0;
  for (std::size_t r = 0; r < a.row_to_col.size(); ++r)
    if (a.row_to_col[r] >= 0)
      a.score += m(static_cast<Eigen::Index>(r), a.row_to_col[r]);
  return a;
}

void RequireNonEmpty(std::span<const Signal> refs, std::span<const Signal> ests) {
  if (refs.empty() || ests.empty())
    Fail(ErrorCode::kEmptyInput, "reference and estimate lists must be non-empty");
}

}  // namespace

PitResult upit(std::span<const Signal> refs, std::span<const Signal> ests) {
  RequireNonEmpty(refs, ests);
  if (refs.size() != ests.size())
    Fail(ErrorCode::kCountMismatch,
         "upit needs equal counts, got " + std::to_string(refs.size()) +
             " references and " + std::to_string(ests.size()) + " estimates");
  PitResult r;
  r.assignment = MatchScores(pairwise_si_snr(ests, refs));
  r.loss = -r.assignment.score;
  return r;
}

double l_match(std::span<const Signal> refs, std::span<const Signal> ests) {
  RequireNonEmpty(refs, ests);
  return MatchScores(pairwise_si_snr(ests, refs)).score;
}

double l_pad(int n_ref, int n_est, double pref_db) {
  return pref_db * std::abs(n_ref - n_est);
}

double p_si_snr_term(double matched_sum, int n_ref, int n_est, double pref_db) {
  if (n_ref < 1 || n_est < 1)
    Fail(ErrorCode::kEmptyInput, "P-SI-SNR needs at least one reference and one estimate");
  return (matched_sum + l_pad(n_ref, n_est, pref_db)) / std::max(n_ref, n_est);
}

double p_si_snr_example(std::span<const Signal> refs,
                        std::span<const Signal> ests, double pref_db) {
  return p_si_snr_term(l_match(refs, ests), static_cast<int>(refs.size()),
                       static_cast<int>(ests.size()), pref_db);
}

ExampleResult score_example(const SeparationExample &ex, double pref_db) {
  ExampleResult r;
  r.true_count = static_cast<int>(ex.refs.size());
  r.pred_count = static_cast<int>(ex.ests.size());
  r.matched_si_snr = l_match(ex.refs, ex.ests);
  r.p_si_snr = p_si_snr_term(r.matched_si_snr, r.true_count, r.pred_count, pref_db);
  return r;
}

double oracle_pref(std::span<const SeparationExample> examples) {
  if (examples.empty())
    Fail(ErrorCode::kEmptyInput, "oracle P_ref of an empty dataset");
  double total = 0.0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const SeparationExample &ex = examples[i];
    if (ex.refs.size() != ex.ests.size())
      Fail(ErrorCode::kCountMismatch,
           "oracle P_ref example " + std::to_string(i) +
               " has mismatched counts");
    total += l_match(ex.refs, ex.ests) / static_cast<double>(ex.refs.size());
  }
  return -(total / static_cast<double>(examples.size()));
}

CountingStats counting_stats(std::span<const std::pair<int, int>> pairs,
                             int max_speakers) {
  if (max_speakers < 1)
    Fail(ErrorCode::kInvalidArgument, "max_speakers must be >= 1");
  CountingStats s;
  const auto k = static_cast<std::size_t>(max_speakers);
  s.confusion.assign(k, std::vector<int>(k, 0));
  for (const auto &[truth, pred] : pairs) {
    if (truth < 1 || truth > max_speakers || pred < 1 || pred > max_speakers)
      Fail(ErrorCode::kInvalidArgument,
           "count pair (" + std::to_string(truth) + ", " + std::to_string(pred) +
               ") outside 1.." + std::to_string(max_speakers));
    ++s.confusion[truth - 1][pred - 1];
  }
  s.recall.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const int row = std::accumulate(s.confusion[c].begin(), s.confusion[c].end(), 0);
    s.recall[c] = row == 0 ? std::numeric_limits<double>::quiet_NaN()
                           : static_cast<double>(s.confusion[c][c]) / row;
  }
  return s;
}

EvalReport assemble_report(std::vector<ExampleResult> results, int max_speakers,
                           PrefPolicy::Mode mode, double pref_db) {
  EvalReport rep;
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(results.size());
  double sum_oracle = 0.0, sum_p = 0.0;
  for (const ExampleResult &r : results) {
    pairs.emplace_back(r.true_count, r.pred_count);
    sum_oracle += r.mean_matched_si_snr();
    sum_p += r.p_si_snr;
  }
  CountingStats stats = counting_stats(pairs, max_speakers);
  rep.confusion = std::move(stats.confusion);
  rep.recall_per_class = std::move(stats.recall);
  const double n = static_cast<double>(results.size());
  rep.mean_oracle_si_snr = results.empty() ? 0.0 : sum_oracle / n;
  rep.mean_p_si_snr = results.empty() ? 0.0 : sum_p / n;
  rep.per_example = std::move(results);
  rep.pref_mode = mode;
  rep.pref_db = pref_db;
  return rep;
}

DatasetScore p_si_snr_dataset(
    std::span<const SeparationExample> examples, const PrefPolicy &policy,
    int max_speakers,
    std::optional<std::span<const SeparationExample>> oracle_examples) {
  if (examples.empty())
    Fail(ErrorCode::kEmptyInput, "P-SI-SNR of an empty dataset");
  double pref = policy.value_db;
  if (policy.mode == PrefPolicy::Mode::kFixedDb) {
    if (!std::isfinite(pref) || pref > 0.0)
      Fail(ErrorCode::kInvalidArgument, "fixed P_ref must be finite and <= 0 dB");
  } else if (oracle_examples) {
    pref = oracle_pref(*oracle_examples);
  } else {
    std::vector<SeparationExample> matched;
    for (const SeparationExample &ex : examples)
      if (ex.refs.size() == ex.ests.size()) matched.push_back(ex);
    if (matched.empty())
      Fail(ErrorCode::kCountMismatch,
           "oracle-average P_ref needs at least one correctly counted example");
    pref = oracle_pref(matched);
  }

  std::vector<ExampleResult> results;
  results.reserve(examples.size());
  for (const SeparationExample &ex : examples)
    results.push_back(score_example(ex, pref));
  DatasetScore out;
  out.report = assemble_report(std::move(results), max_speakers, policy.mode, pref);
  out.mean = out.report.mean_p_si_snr;
  return out;
}

double upper_bound(double a, double x_db, int k, double pref_db) {
  if (!(a >= 0.0 && a <= 1.0))
    Fail(ErrorCode::kInvalidArgument, "accuracy must lie in [0, 1]");
  if (k < 1) Fail(ErrorCode::kInvalidArgument, "speaker count must be >= 1");
  return a * x_db + (1.0 - a) * (k * x_db + pref_db) / (k + 1);
}

std::string ReportToJson(const EvalReport &report, int indent) {
  using nlohmann::json;
  json flags = json::array();
  auto num = [&flags](double v, const std::string &name) -> json {
    if (std::isfinite(v)) return v;
    flags.push_back(name + (std::isnan(v) ? "=nan" : v > 0 ? "=+inf" : "=-inf"));
    return nullptr;
  };
  json examples = json::array();
  for (std::size_t i = 0; i < report.per_example.size(); ++i) {
    const ExampleResult &r = report.per_example[i];
    const std::string at = "examples[" + std::to_string(i) + "].";
    examples.push_back({{"true_count", r.true_count},
                        {"pred_count", r.pred_count},
                        {"matched_si_snr", num(r.matched_si_snr, at + "matched_si_snr")},
                        {"p_si_snr", num(r.p_si_snr, at + "p_si_snr")}});
  }
  json recall = json::array();
  for (double v : report.recall_per_class) {
    if (std::isnan(v)) recall.push_back(nullptr);  // class absent
    else recall.push_back(v);
  }
  json j;
  j["examples"] = std::move(examples);
  j["confusion"] = report.confusion;
  j["recall"] = std::move(recall);
  j["mean_oracle_si_snr"] = num(report.mean_oracle_si_snr, "mean_oracle_si_snr");
  j["mean_p_si_snr"] = num(report.mean_p_si_snr, "mean_p_si_snr");
  j["pref_mode"] = report.pref_mode == PrefPolicy::Mode::kFixedDb ? "fixed_db"
                                                                   : "oracle_average";
  j["pref_db"] = num(report.pref_db, "pref_db");
  if (!flags.empty()) j["non_finite"] = std::move(flags);
  return j.dump(indent);
}

}  // namespace varisep
