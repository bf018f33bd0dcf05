// src/assignment.cc


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

#include "varisep/assignment.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "varisep/error.h"

namespace varisep {

std::size_t Assignment::num_matched() const {
  return static_cast<std::size_t>(
      std::count_if(row_to_col.begin(), row_to_col.end(),
                    [](int c) { return c >= 0; }));
}

std::vector<int> Assignment::col_to_row(int num_cols) const {
  std::vector<int> inv(static_cast<std::size_t>(num_cols), -1);
  for (std::size_t r = 0; r < row_to_col.size(); ++r)
    if (row_to_col[r] >= 0) inv[static_cast<std::size_t>(row_to_col[r])] = static_cast<int>(r);
  return inv;
}

namespace {

// Hungarian method with potentials, minimizing cost over an n x m matrix
// with n <= m. Returns the column of every row.
std::vector<int> MinCostRows(const Eigen::MatrixXd &cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

// Best total score for matching `rows` into `cols` (|rows| <= |cols|).
double BestScore(const Eigen::MatrixXd &score, const std::vector<int> &rows,
                 const std::vector<int> &cols) {
  if (rows.empty()) return 0.0;
  Eigen::MatrixXd cost(rows.size(), cols.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c)
      cost(r, c) = -score(rows[r], cols[c]);
  const std::vector<int> match = MinCostRows(cost);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r)
    total += score(rows[r], cols[match[r]]);
  return total;
}

// Rows are the smaller axis here.
std::vector<int> SolveWide(const Eigen::MatrixXd &score) {
  const int n = static_cast<int>(score.rows());
  const int m = static_cast<int>(score.cols());
  std::vector<int> all_rows(n), all_cols(m);
  for (int i = 0; i < n; ++i) all_rows[i] = i;
  for (int j = 0; j < m; ++j) all_cols[j] = j;
  const double best = BestScore(score, all_rows, all_cols);
  const double tol = 8.0 * n * std::numeric_limits<double>::epsilon() *
                     std::max(1.0, score.cwiseAbs().maxCoeff());

  // Fix rows one at a time to the smallest column that keeps the optimum
  // reachable.
  std::vector<int> result(n, -1);
  std::vector<char> taken(m, 0);
  double fixed = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> rest_rows(all_rows.begin() + i + 1, all_rows.end());
    int chosen = -1;
    double chosen_total = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      if (taken[j]) continue;
      std::vector<int> rest_cols;
      for (int c = 0; c < m; ++c)
        if (!taken[c] && c != j) rest_cols.push_back(c);
      const double total =
          fixed + score(i, j) + BestScore(score, rest_rows, rest_cols);
      if (total >= best - tol) {
        chosen = j;
        break;
      }
      if (total > chosen_total) {
        chosen_total = total;
        chosen = j;
      }
    }
    result[i] = chosen;
    taken[chosen] = 1;
    fixed += score(i, chosen);
  }
  return result;
}

}  // namespace

Assignment solve_assignment(const Eigen::MatrixXd &score) {
  if (score.rows() == 0 || score.cols() == 0)
    Fail(ErrorCode::kEmptyInput, "assignment on an empty matrix");
  if (!score.allFinite())
    Fail(ErrorCode::kNonFinite, "assignment matrix has non-finite entries");

  Assignment a;
  a.row_to_col.assign(static_cast<std::size_t>(score.rows()), -1);
  if (score.rows() <= score.cols()) {
    a.row_to_col = SolveWide(score);
  } else {
    const Eigen::MatrixXd t = score.transpose();
    const std::vector<int> col_to_row = SolveWide(t);
    for (std::size_t c = 0; c < col_to_row.size(); ++c)
      a.row_to_col[static_cast<std::size_t>(col_to_row[c])] = static_cast<int>(c);
  }
  for (std::size_t r = 0; r < a.row_to_col.size(); ++r)
    if (a.row_to_col[r] >= 0)
      a.score += score(static_cast<Eigen::Index>(r), a.row_to_col[r]);
  return a;
}

}  // namespace varisep
