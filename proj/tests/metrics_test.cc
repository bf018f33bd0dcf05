// tests/metrics_test.cc


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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "oracles.h"
#include "test_util.h"
#include "varisep/error.h"
#include "varisep/metrics.h"

using namespace varisep;
using testutil::AtDb;
using testutil::Noise;

TEST_CASE("si_snr: hand-derived 0 dB case") {
  const Signal ref({1, 0, -1, 0}, 8000), est({1, 1, -1, -1}, 8000);
  CHECK(std::abs(si_snr(est, ref)) < 1e-9);
}

TEST_CASE("si_snr: identical signals give +inf, zero energy is an error") {
  std::mt19937_64 rng(1);
  const Signal s = Noise(100, rng);
  CHECK(si_snr(s, s) == std::numeric_limits<double>::infinity());
  Signal dc({0.5, 0.5, 0.5}, 8000);
  Signal x({0.1, 0.2, 0.3}, 8000);
  CHECK_THROWS_AS(si_snr(x, dc), Error);
  CHECK_THROWS_AS(si_snr(dc, x), Error);
  CHECK_THROWS_AS(si_snr(Signal({1, 2}, 8000), x), Error);
}

TEST_CASE("si_snr agrees with the direct transcription") {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const Signal a = Noise(257, rng), b = Noise(257, rng);
    Signal mixed = a;
    for (std::size_t i = 0; i < a.size(); ++i) mixed.samples[i] += 0.3 * b.samples[i];
    CHECK(si_snr(mixed, a) ==
          doctest::Approx(oracle::SiSnr(mixed.samples, a.samples)).epsilon(1e-10));
  }
}

TEST_CASE("property: si_snr scale invariance") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const Signal ref = Noise(300, rng);
    const Signal est = AtDb(ref, 5.0 + t * 0.1, rng);
    const double base = si_snr(est, ref);
    for (double alpha : {-2.0, 0.5, 10.0}) {
      Signal scaled = est;
      for (double &v : scaled.samples) v *= alpha;
      CHECK(std::abs(si_snr(scaled, ref) - base) < 1e-6);
    }
  }
}

TEST_CASE("si_snr_with_grad matches central differences") {
  std::mt19937_64 rng(4);
  const Signal ref = Noise(40, rng);
  Signal est = AtDb(ref, 3.0, rng);
  const SiSnrGrad g = si_snr_with_grad(est.view(), ref.view());
  CHECK(g.value == doctest::Approx(si_snr(est, ref)));
  const double h = 1e-6;
  for (std::size_t i = 0; i < est.size(); ++i) {
    Signal p = est, m = est;
    p.samples[i] += h;
    m.samples[i] -= h;
    const double fd = (si_snr(p, ref) - si_snr(m, ref)) / (2 * h);
    CHECK(g.d_est[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("upit: swapped estimates are matched back") {
  std::mt19937_64 rng(5);
  const Signal a = Noise(400, rng), b = Noise(400, rng);
  Signal ea = a, eb = b;
  const Signal n1 = Noise(400, rng, 0.05), n2 = Noise(400, rng, 0.05);
  for (std::size_t i = 0; i < 400; ++i) {
    eb.samples[i] += n1.samples[i];
    ea.samples[i] += n2.samples[i];
  }
  const Signal refs[] = {a, b};
  const Signal ests[] = {eb, ea};
  const PitResult r = upit(refs, ests);
  CHECK(r.assignment.row_to_col == std::vector<int>{1, 0});
  // Brute force over both permutations.
  const double keep = si_snr(eb, a) + si_snr(ea, b);
  const double swap = si_snr(eb, b) + si_snr(ea, a);
  CHECK(swap > keep);
  CHECK(r.loss == doctest::Approx(-swap));

  const Signal ordered[] = {ea, eb};
  CHECK(upit(refs, ordered).assignment.row_to_col == std::vector<int>{0, 1});
}

TEST_CASE("upit: single pair and errors") {
  std::mt19937_64 rng(6);
  const Signal r = Noise(50, rng);
  const Signal e = AtDb(r, 12.0, rng);
  const Signal refs[] = {r};
  const Signal ests[] = {e};
  CHECK(upit(refs, ests).loss == doctest::Approx(-12.0).epsilon(1e-9));
  const Signal two[] = {e, e};
  CHECK_THROWS_AS(upit(refs, two), Error);
  CHECK_THROWS_AS(upit(std::span<const Signal>{}, std::span<const Signal>{}), Error);
}

TEST_CASE("property: upit loss invariant to permutations of either list") {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 20; ++t) {
    const int k = 2 + t % 4;
    std::vector<Signal> refs, ests;
    for (int i = 0; i < k; ++i) refs.push_back(Noise(128, rng));
    for (int i = 0; i < k; ++i) ests.push_back(AtDb(refs[(i + 1) % k], 3.0 * i, rng));
    const double base = upit(refs, ests).loss;
    for (int p = 0; p < 5; ++p) {
      std::shuffle(refs.begin(), refs.end(), rng);
      CHECK(upit(refs, ests).loss == doctest::Approx(base).epsilon(1e-12));
      std::shuffle(ests.begin(), ests.end(), rng);
      CHECK(upit(refs, ests).loss == doctest::Approx(base).epsilon(1e-12));
    }
  }
}

TEST_CASE("l_match") {
  std::mt19937_64 rng(8);
  const Signal r1 = Noise(200, rng), r2 = Noise(200, rng), r3 = Noise(200, rng);
  const Signal e3 = AtDb(r3, 9.0, rng), e1 = AtDb(r1, 15.0, rng);
  const Signal refs[] = {r1, r2, r3};
  const Signal ests[] = {e3, e1};
  // Brute force over all injective maps of the two estimates.
  double best = -1e300;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) best = std::max(best, si_snr(e3, refs[i]) + si_snr(e1, refs[j]));
  CHECK(l_match(refs, ests) == doctest::Approx(best));
  CHECK(l_match(refs, ests) == doctest::Approx(24.0).epsilon(1e-9));
  // Symmetric in which list is longer.
  CHECK(l_match(ests, refs) == doctest::Approx(
                                   si_snr(r3, e3) + si_snr(r1, e1)).epsilon(1e-12));

  const Signal one_r[] = {r1};
  const Signal one_e[] = {e1};
  CHECK(l_match(one_r, one_e) == doctest::Approx(si_snr(e1, r1)));
  const Signal sq_refs[] = {r1, r3};
  CHECK(l_match(sq_refs, ests) == doctest::Approx(-upit(sq_refs, ests).loss));
}

TEST_CASE("l_pad") {
  CHECK(l_pad(3, 2, -30.0) == -30.0);
  CHECK(l_pad(2, 2, -17.0) == 0.0);
  CHECK(l_pad(5, 2, -30.0) == -90.0);
  CHECK(l_pad(2, 5, -30.0) == -90.0);
}

TEST_CASE("p_si_snr_example fixtures") {
  std::mt19937_64 rng(9);
  const Signal r1 = Noise(300, rng), r2 = Noise(300, rng), r3 = Noise(300, rng);
  const Signal matched_refs[] = {r1, r2};
  const Signal matched_ests[] = {AtDb(r2, 20.0, rng), AtDb(r1, 10.0, rng)};
  CHECK(p_si_snr_example(matched_refs, matched_ests, -30.0) ==
        doctest::Approx(15.0).epsilon(1e-9));

  const Signal refs3[] = {r1, r2, r3};
  const Signal ests2[] = {AtDb(r1, 10.0, rng), AtDb(r3, 14.0, rng)};
  CHECK(p_si_snr_example(refs3, ests2, -30.0) == doctest::Approx(-2.0).epsilon(1e-9));

  const Signal all_at[] = {AtDb(r1, 7.5, rng), AtDb(r2, 7.5, rng), AtDb(r3, 7.5, rng)};
  CHECK(p_si_snr_example(refs3, all_at, -30.0) == doctest::Approx(7.5).epsilon(1e-9));
}

TEST_CASE("property: miscounting strictly lowers the score when pref is low") {
  std::mt19937_64 rng(10);
  for (int t = 0; t < 30; ++t) {
    std::vector<Signal> refs;
    const int nr = 1 + t % 4;
    for (int i = 0; i < nr; ++i) refs.push_back(Noise(128, rng));
    std::vector<Signal> ests;
    const int ne = 1 + (t / 4) % 4;
    for (int i = 0; i < ne; ++i) ests.push_back(AtDb(refs[i % nr], 4.0 + i, rng));
    const double matched = l_match(refs, ests);
    const double mean_matched = matched / std::min(nr, ne);
    const double p = p_si_snr_example(refs, ests, -30.0);
    if (nr == ne) CHECK(p == doctest::Approx(mean_matched));
    else CHECK(p < mean_matched);
  }
}

namespace {

SeparationExample Example(std::mt19937_64 &rng, const std::vector<double> &dbs,
                          int n_refs) {
  SeparationExample ex;
  for (int i = 0; i < n_refs; ++i) ex.refs.push_back(Noise(200, rng));
  for (std::size_t i = 0; i < dbs.size(); ++i)
    ex.ests.push_back(AtDb(ex.refs[i % ex.refs.size()], dbs[i], rng));
  return ex;
}

}  // namespace

TEST_CASE("oracle_pref") {
  std::mt19937_64 rng(11);
  std::vector<SeparationExample> exs = {Example(rng, {12, 12}, 2),
                                        Example(rng, {12, 12, 12}, 3)};
  CHECK(oracle_pref(exs) == doctest::Approx(-12.0).epsilon(1e-9));
  exs = {Example(rng, {10, 10}, 2), Example(rng, {15, 25}, 2)};
  CHECK(oracle_pref(exs) == doctest::Approx(-15.0).epsilon(1e-9));
  CHECK_THROWS_AS(oracle_pref(std::span<const SeparationExample>{}), Error);
  exs.push_back(Example(rng, {10}, 2));
  CHECK_THROWS_AS(oracle_pref(exs), Error);
}

TEST_CASE("p_si_snr_dataset") {
  std::mt19937_64 rng(12);
  SUBCASE("matched counts: mean equals mean matched SI-SNR for any policy") {
    std::vector<SeparationExample> exs = {Example(rng, {8, 12}, 2),
                                          Example(rng, {3, 6, 9}, 3)};
    const double expect = (10.0 + 6.0) / 2.0;
    for (const PrefPolicy &p : {PrefPolicy::Fixed(-30), PrefPolicy::Fixed(-5),
                                PrefPolicy::OracleAverage()}) {
      const DatasetScore s = p_si_snr_dataset(exs, p, 5);
      CHECK(s.mean == doctest::Approx(expect).epsilon(1e-9));
      CHECK(s.report.mean_oracle_si_snr == doctest::Approx(expect).epsilon(1e-9));
    }
    const DatasetScore o = p_si_snr_dataset(exs, PrefPolicy::OracleAverage(), 5);
    CHECK(o.mean == doctest::Approx(-oracle_pref(exs)).epsilon(1e-12));
    CHECK(o.report.pref_db == doctest::Approx(-8.0).epsilon(1e-9));
  }
  SUBCASE("terms 15 and -2 average to 6.5") {
    SeparationExample a = Example(rng, {10, 20}, 2);
    SeparationExample b = Example(rng, {10, 14}, 3);
    b.ests[1] = AtDb(b.refs[2], 14.0, rng);
    std::vector<SeparationExample> exs = {a, b};
    const DatasetScore s = p_si_snr_dataset(exs, PrefPolicy::Fixed(-30), 3);
    CHECK(s.mean == doctest::Approx(6.5).epsilon(1e-9));
    CHECK(s.report.per_example[1].p_si_snr == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(s.report.confusion[2][1] == 1);
    CHECK(s.report.confusion[1][1] == 1);
  }
  SUBCASE("all examples miscounted by one") {
    std::vector<SeparationExample> exs = {Example(rng, {10}, 2),
                                          Example(rng, {10, 10, 10}, 2)};
    // (10 - 30) / 2 and (20 - 30) / 3.
    const DatasetScore s = p_si_snr_dataset(exs, PrefPolicy::Fixed(-30), 3);
    CHECK(s.mean == doctest::Approx((-10.0 + -10.0 / 3.0) / 2.0).epsilon(1e-9));
    CHECK(s.report.recall_per_class[1] == 0.0);
    CHECK(std::isnan(s.report.recall_per_class[0]));
    CHECK_THROWS_AS(p_si_snr_dataset(exs, PrefPolicy::OracleAverage(), 3), Error);
    // An explicit oracle set supplies the penalty instead.
    std::vector<SeparationExample> oracle = {Example(rng, {16, 16}, 2)};
    const DatasetScore o = p_si_snr_dataset(exs, PrefPolicy::OracleAverage(), 3,
                                            std::span<const SeparationExample>(oracle));
    CHECK(o.report.pref_db == doctest::Approx(-16.0).epsilon(1e-9));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(p_si_snr_dataset({}, PrefPolicy::Fixed(-30), 3), Error);
    std::vector<SeparationExample> exs = {Example(rng, {10, 10}, 2)};
    CHECK_THROWS_AS(p_si_snr_dataset(exs, PrefPolicy::Fixed(3.0), 3), Error);
    CHECK_THROWS_AS(p_si_snr_dataset(exs, PrefPolicy::Fixed(-30), 1), Error);
  }
}

TEST_CASE("property: dataset mean is independent of storage order") {
  std::mt19937_64 rng(13);
  std::vector<SeparationExample> exs;
  for (int i = 0; i < 12; ++i)
    exs.push_back(Example(rng, std::vector<double>(1 + i % 3, 2.0 + i), 1 + (i + 1) % 3));
  const double base = p_si_snr_dataset(exs, PrefPolicy::Fixed(-30), 3).mean;
  // Results are reduced in index order after scoring, so reordering storage
  // and reordering back reproduces the aggregate bit for bit.
  std::vector<std::size_t> perm(exs.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<SeparationExample> shuffled;
  for (std::size_t i : perm) shuffled.push_back(exs[i]);
  std::vector<ExampleResult> scored(exs.size());
  for (std::size_t i = 0; i < perm.size(); ++i) scored[perm[i]] = score_example(shuffled[i], -30);
  CHECK(assemble_report(scored, 3, PrefPolicy::Mode::kFixedDb, -30).mean_p_si_snr == base);
  // And the shuffled aggregate agrees to rounding.
  CHECK(p_si_snr_dataset(shuffled, PrefPolicy::Fixed(-30), 3).mean ==
        doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("upper_bound: published values") {
  auto r1 = [](double v) { return std::round(v * 10.0) / 10.0; };
  CHECK(r1(upper_bound(0.813, 18.21, 2, -30.0)) == doctest::Approx(15.2));
  CHECK(r1(upper_bound(0.923, 10.56, 5, -30.0)) == doctest::Approx(10.0));
  CHECK(r1(upper_bound(0.813, 18.21, 2, -18.21)) == doctest::Approx(15.9));
  CHECK(upper_bound(1.0, 12.34, 3, -30.0) == doctest::Approx(12.34));
  CHECK_THROWS_AS(upper_bound(1.5, 10, 2, -30), Error);
  CHECK_THROWS_AS(upper_bound(0.5, 10, 0, -30), Error);
}

TEST_CASE("property: upper_bound monotone in accuracy and pref") {
  for (int k = 1; k <= 5; ++k)
    for (double x = 0.0; x <= 20.0; x += 2.5) {
      double prev = -1e300;
      for (double a = 0.0; a <= 1.0001; a += 0.05) {
        const double v = upper_bound(std::min(a, 1.0), x, k, -30.0);
        CHECK(v >= prev);
        prev = v;
      }
      prev = -1e300;
      for (double p = -60.0; p <= 0.0; p += 2.0) {
        const double v = upper_bound(0.7, x, k, p);
        CHECK(v > prev);
        prev = v;
      }
    }
}

TEST_CASE("counting_stats") {
  std::vector<std::pair<int, int>> all_right = {{1, 1}, {2, 2}, {3, 3}, {2, 2}};
  CountingStats s = counting_stats(all_right, 3);
  CHECK(s.confusion == std::vector<std::vector<int>>{{1, 0, 0}, {0, 2, 0}, {0, 0, 1}});
  CHECK(s.recall == std::vector<double>{1.0, 1.0, 1.0});

  std::vector<std::pair<int, int>> pairs(99, {2, 2});
  pairs.push_back({2, 3});
  CHECK(counting_stats(pairs, 3).recall[1] == doctest::Approx(0.99));

  std::vector<std::pair<int, int>> mixed = {{2, 2}, {2, 3}, {3, 3}, {3, 2},
                                            {3, 4}, {4, 4}, {4, 4}, {4, 3}};
  s = counting_stats(mixed, 4);
  const std::vector<std::vector<int>> expect = {
      {0, 0, 0, 0}, {0, 1, 1, 0}, {0, 1, 1, 1}, {0, 0, 1, 2}};
  CHECK(s.confusion == expect);
  CHECK(std::isnan(s.recall[0]));
  CHECK(s.recall[1] == 0.5);
  CHECK(s.recall[2] == doctest::Approx(1.0 / 3.0));
  CHECK(s.recall[3] == doctest::Approx(2.0 / 3.0));
  std::vector<std::pair<int, int>> bad = {{2, 6}};
  CHECK_THROWS_AS(counting_stats(bad, 5), Error);
}

TEST_CASE("report JSON schema") {
  std::mt19937_64 rng(14);
  std::vector<SeparationExample> exs = {Example(rng, {10, 20}, 2)};
  exs.push_back(SeparationExample{exs[0].refs, exs[0].refs});  // perfect: +inf
  const DatasetScore s = p_si_snr_dataset(exs, PrefPolicy::Fixed(-30), 2);
  const auto j = nlohmann::json::parse(ReportToJson(s.report));
  CHECK(j["examples"].size() == 2);
  CHECK(j["examples"][0]["true_count"] == 2);
  CHECK(j["examples"][0]["p_si_snr"].get<double>() == doctest::Approx(15.0));
  CHECK(j["examples"][1]["p_si_snr"].is_null());
  CHECK(j["mean_p_si_snr"].is_null());
  CHECK(j["confusion"] == nlohmann::json::array({{0, 0}, {0, 2}}));
  CHECK(j["recall"][0].is_null());
  CHECK(j["recall"][1] == 1.0);
  CHECK(j["pref_mode"] == "fixed_db");
  CHECK(j["pref_db"] == -30.0);
  CHECK(j["non_finite"].size() == 4);
}
