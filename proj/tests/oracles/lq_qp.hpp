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

// Condensed quadratic program over the stacked controls
//   minimize 1/2 z'Hz + g'z + c  subject to  E z = e,
// solved by the null-space method. States are eliminated with the
// convolution x_t = A^t x0 + sum_{s<t} A^{t-1-s} B u_s, so nothing here
// shares code with the solver's stacked KKT system.

#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "pmpfreq/core.hpp"

namespace pmpfreq::oracle {

struct QpAnswer {
  bool feasible = true;
  std::vector<Vector> controls;
  std::vector<Vector> states;
  double cost = 0.0;
};

struct CondensedLq {
  Matrix H;                      // (mN) x (mN)
  Vector g;                      // mN
  double c = 0.0;
  std::vector<Matrix> to_state;  // x_t = free[t] + to_state[t] z
  std::vector<Vector> free;
};

inline CondensedLq condense(const Matrix& A, const Matrix& B, const Matrix& Q,
                            const Matrix& R, int N, const Vector& x0) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  CondensedLq out;
  out.H = Matrix::Zero(m * N, m * N);
  out.g = Vector::Zero(m * N);
  Matrix G = Matrix::Zero(n, m * N);
  Vector f = x0;
  for (int t = 0; t <= N; ++t) {
    out.to_state.push_back(G);
    out.free.push_back(f);
    if (t == N) break;
    out.H += G.transpose() * Q * G;
    out.g += G.transpose() * Q * f;
    out.c += 0.5 * f.dot(Q * f);
    out.H.block(t * m, t * m, m, m) += R;
    Matrix next = A * G;
    next.middleCols(t * m, m) += B;
    G = next;
    f = A * f;
  }
  return out;
}

inline QpAnswer solve_equality_qp(const CondensedLq& lq, const Matrix& E, const Vector& e,
                                  int N, int m) {
  QpAnswer ans;
  const Eigen::Index dim = lq.H.rows();
  Vector particular = Vector::Zero(dim);
  Matrix basis = Matrix::Identity(dim, dim);
  if (E.rows() > 0) {
    Eigen::JacobiSVD<Matrix> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vector& s = svd.singularValues();
    const double tol = std::max(1e-12, 1e-12 * (s.size() ? s(0) : 0.0));
    int rank = 0;
    while (rank < s.size() && s(rank) > tol) ++rank;
    const Vector proj = svd.matrixU().transpose() * e;
    for (int i = 0; i < rank; ++i)
      particular += svd.matrixV().col(i) * (proj(i) / s(i));
    if ((E * particular - e).norm() > 1e-8 * (1.0 + e.norm())) {
      ans.feasible = false;
      return ans;
    }
    basis = svd.matrixV().rightCols(dim - rank);
  }
  Vector z = particular;
  if (basis.cols() > 0) {
    const Matrix reduced = basis.transpose() * lq.H * basis;
    const Vector rhs = -basis.transpose() * (lq.H * particular + lq.g);
    z += basis * reduced.ldlt().solve(rhs);
  }
  ans.cost = 0.5 * z.dot(lq.H * z) + lq.g.dot(z) + lq.c;
  for (int t = 0; t < N; ++t) ans.controls.push_back(z.segment(t * m, m));
  for (std::size_t t = 0; t < lq.free.size(); ++t)
    ans.states.push_back(lq.free[t] + lq.to_state[t] * z);
  return ans;
}

/// Free final state.
inline QpAnswer lq_free_qp(const Matrix& A, const Matrix& B, const Matrix& Q,
                           const Matrix& R, int N, const Vector& x0) {
  const auto lq = condense(A, B, Q, R, N, x0);
  return solve_equality_qp(lq, Matrix(0, lq.H.cols()), Vector(0), N,
                           static_cast<int>(B.cols()));
}

/// x_N = xf and F z = 0 (F may have zero rows or dependent rows).
inline QpAnswer lq_transfer_qp(const Matrix& A, const Matrix& B, const Matrix& Q,
                               const Matrix& R, int N, const Vector& x0,
                               const Vector& xf, const Matrix& F) {
  const auto lq = condense(A, B, Q, R, N, x0);
  const Eigen::Index n = A.rows();
  Matrix E(n + F.rows(), lq.H.cols());
  Vector e = Vector::Zero(E.rows());
  E.topRows(n) = lq.to_state[N];
  e.head(n) = xf - lq.free[N];
  if (F.rows() > 0) E.bottomRows(F.rows()) = F;
  return solve_equality_qp(lq, E, e, N, static_cast<int>(B.cols()));
}

}  // namespace pmpfreq::oracle
