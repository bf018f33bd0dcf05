// include/varisep/assignment.h


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

#ifndef VARISEP_ASSIGNMENT_H_
#define VARISEP_ASSIGNMENT_H_

#include <vector>

#include <Eigen/Core>

namespace varisep {

/// An injective pairing between the rows and columns of a score matrix.
/// row_to_col[r] is the matched column or -1 when r is left out (only
/// possible when there are more rows than columns).
struct Assignment {
  std::vector<int> row_to_col;
  double score = 0.0;

  std::size_t num_matched() const;
  /// Inverse view: col_to_row[c] is the matched row or -1.
  std::vector<int> col_to_row(int num_cols) const;
};

/// Maximum-score linear assignment on a rectangular matrix. The smaller axis
/// is matched completely into the larger one. Among optimal solutions the
/// one whose mapping (smaller axis -> larger axis, in index order) is
/// lexicographically smallest is returned, so results do not depend on
/// floating-point accident in the solver.
///
/// Throws kEmptyInput for a 0-sized matrix and kNonFinite for NaN/Inf.
Assignment solve_assignment(const Eigen::MatrixXd &score);

}  // namespace varisep

#endif  // VARISEP_ASSIGNMENT_H_
