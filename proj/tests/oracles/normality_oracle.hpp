/*
 * Copyright 2026 The pmpfreq Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Brute-force abnormality test. Builds the linear map
//   (p_{N-1}, nu) -> (B'p_t - F_t' nu)_{t=0..N-1},  p_{t-1} = A'p_t,
// column by column by running the homogeneous adjoint recursion, replaces F
// by an orthonormal basis of its row space, and inspects the null space
// with a full SVD.

#pragma once

#include <Eigen/Dense>

#include "pmpfreq/core.hpp"

namespace pmpfreq::oracle {

enum class Normality { kAllNormal, kAllAbnormal, kUndetermined };

struct NormalityAnswer {
  Normality verdict = Normality::kUndetermined;
  int q = 0;
  int null_dim = 0;
};

/// Orthonormal basis (as rows) of the row space of F.
inline Matrix row_space_basis(const Matrix& F) {
  if (F.rows() == 0) return Matrix(0, F.cols());
  Eigen::JacobiSVD<Matrix> svd(F, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  int rank = 0;
  const double tol = std::max(1e-12, 1e-12 * s(0));
  while (rank < s.size() && s(rank) > tol) ++rank;
  return svd.matrixV().leftCols(rank).transpose();
}

inline NormalityAnswer brute_force_normality(const Matrix& A, const Matrix& B, int N,
                                             const Matrix& F_time_stacked) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const Matrix F = row_space_basis(F_time_stacked);
  const int q = static_cast<int>(F.rows());
  Matrix M = Matrix::Zero(m * N, n + q);
  for (int i = 0; i < n; ++i) {
    Vector p = Vector::Unit(n, i);
    for (int t = N - 1; t >= 0; --t) {
      M.block(t * m, i, m, 1) = B.transpose() * p;
      p = A.transpose() * p;
    }
  }
  for (int j = 0; j < q; ++j)
    for (int t = 0; t < N; ++t)
      M.block(t * m, n + j, m, 1) = -F.block(j, t * m, 1, m).transpose();

  NormalityAnswer ans;
  ans.q = q;
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double tol =
      s.size() ? std::max(1e-12, 1e-14 * std::max(M.rows(), M.cols()) * s(0)) : 1e-12;
  int rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;
  ans.null_dim = (n + q) - rank;
  if (n + q > m * N)
    ans.verdict = Normality::kAllAbnormal;
  else if (ans.null_dim == 0)
    ans.verdict = Normality::kAllNormal;
  else
    ans.verdict = Normality::kUndetermined;
  return ans;
}

}  // namespace pmpfreq::oracle
