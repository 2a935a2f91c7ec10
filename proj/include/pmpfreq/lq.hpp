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

// Exact solvers for linear-quadratic problems
//
//   minimize  sum_{t=0}^{N-1} 1/2 x_t'Q x_t + 1/2 u_t'R u_t
//   s.t.      x_{t+1} = A x_t + B u_t,  x_0 = x0
//
// in three flavours: free final state (Riccati recursion, or the normal
// extremal equations solved as one linear system), fixed final state, and
// fixed final state with banned control frequencies. The last two solve the
// normal-form necessary conditions
//
//   x_{t+1} = A x_t + B u_t                  t = 0..N-1
//   p_{t-1} = A'p_t - Q x_t                  t = 1..N-1
//   R u_t   = B'p_t - F_t'nu                 t = 0..N-1
//   sum_t F_t u_t = 0,   x_0 = x0,  x_N = xf
//
// with p_0 and p_{N-1} left free. For a convex QP these are also
// sufficient, so a consistent system means an optimal transfer and an
// inconsistent one means the target cannot be reached.

#pragma once

#include <string>
#include <vector>

#include "pmpfreq/core.hpp"
#include "pmpfreq/extremal.hpp"
#include "pmpfreq/spectrum.hpp"

namespace pmpfreq {

enum class SolveStatus { kSolved, kInfeasible, kSingular, kAbnormalRegime };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kSolved: return "SOLVED";
    case SolveStatus::kInfeasible: return "INFEASIBLE";
    case SolveStatus::kSingular: return "SINGULAR";
    case SolveStatus::kAbnormalRegime: return "ABNORMAL_REGIME";
  }
  return "?";
}

struct RiccatiSolution {
  std::vector<Matrix> value;  // S_0..S_N
  std::vector<Matrix> gains;  // K_0..K_{N-1}
  double cost = 0.0;          // 1/2 x0'S_0 x0
};

struct RiccatiResult {
  RiccatiSolution solution;
  Trajectory trajectory;
  SolveStatus status = SolveStatus::kSolved;
};

struct LqSolution {
  Trajectory trajectory;
  std::vector<Vector> adjoints;  // p_0..p_{N-1}
  Vector nu;                     // empty when there are no frequency rows
  double cost = 0.0;
  SolveStatus status = SolveStatus::kSolved;
  double residual = 0.0;  // least-squares residual of the stacked system
};

inline double lq_cost(const Matrix& Q, const Matrix& R, const Trajectory& traj) {
  double c = 0.0;
  for (int t = 0; t < traj.horizon(); ++t) {
    c += 0.5 * traj.states[t].dot(Q * traj.states[t]);
    c += 0.5 * traj.controls[t].dot(R * traj.controls[t]);
  }
  return c;
}

namespace detail {

inline void check_lq_shapes(const Matrix& A, const Matrix& B, const Matrix& Q,
                            const Matrix& R, int horizon, const Vector& x0) {
  if (horizon < 1) throw Error(ErrorCode::kInvalidHorizon, "horizon must be positive");
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != m || R.cols() != m || x0.size() != n || m == 0 || n == 0) {
    throw Error(ErrorCode::kShape, "inconsistent LQ dimensions");
  }
}

}  // namespace detail

/// Backward recursion S_N = 0,
///   K_t = -(R + B'S_{t+1}B)^{-1} B'S_{t+1}A,
///   S_t = (A + B K_t)'S_{t+1}(A + B K_t) + K_t'R K_t + Q,
/// then the rollout u_t = K_t x_t.
inline RiccatiResult riccati_solve(const Matrix& A, const Matrix& B, const Matrix& Q,
                                   const Matrix& R, int horizon, const Vector& x0) {
  detail::check_lq_shapes(A, B, Q, R, horizon, x0);
  const Eigen::Index n = A.rows();
  RiccatiResult out;
  auto& sol = out.solution;
  sol.value.assign(horizon + 1, Matrix::Zero(n, n));
  sol.gains.resize(horizon);
  for (int t = horizon - 1; t >= 0; --t) {
    const Matrix& next = sol.value[t + 1];
    const Matrix BtS = B.transpose() * next;
    Eigen::LLT<Matrix> llt(R + BtS * B);
    if (llt.info() != Eigen::Success) {
      out.status = SolveStatus::kSingular;
      return out;
    }
    sol.gains[t] = -llt.solve(BtS * A);
    const Matrix closed = A + B * sol.gains[t];
    Matrix S = closed.transpose() * next * closed +
               sol.gains[t].transpose() * R * sol.gains[t] + Q;
    sol.value[t] = 0.5 * (S + S.transpose());
  }
  auto& traj = out.trajectory;
  traj.states.assign(1, x0);
  for (int t = 0; t < horizon; ++t) {
    traj.controls.push_back(sol.gains[t] * traj.states[t]);
    traj.states.push_back(A * traj.states[t] + B * traj.controls[t]);
  }
  sol.cost = 0.5 * x0.dot(sol.value[0] * x0);
  return out;
}

/// Free-final-state problem through the normal extremal equations with
/// p_{N-1} = 0; in particular u_{N-1} = 0.
inline LqSolution lq_pmp_solve(const Matrix& A, const Matrix& B, const Matrix& Q,
                               const Matrix& R, int horizon, const Vector& x0) {
  detail::check_lq_shapes(A, B, Q, R, horizon, x0);
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int N = horizon;
  // Unknowns: x_1..x_N, u_0..u_{N-1}, p_0..p_{N-1}.
  const auto xi = [&](int t) { return (t - 1) * n; };
  const auto ui = [&](int t) { return N * n + t * m; };
  const auto pi = [&](int t) { return N * n + N * m + t * n; };
  const int size = 2 * N * n + N * m;

  Matrix K = Matrix::Zero(size, size);
  Vector rhs = Vector::Zero(size);
  const Matrix I = Matrix::Identity(n, n);
  int row = 0;
  for (int t = 0; t < N; ++t, row += n) {
    K.block(row, xi(t + 1), n, n) = I;
    if (t >= 1)
      K.block(row, xi(t), n, n) = -A;
    else
      rhs.segment(row, n) = A * x0;
    K.block(row, ui(t), n, m) = -B;
  }
  for (int t = 1; t < N; ++t, row += n) {
    K.block(row, pi(t - 1), n, n) = I;
    K.block(row, pi(t), n, n) = -A.transpose();
    K.block(row, xi(t), n, n) = Q;
  }
  for (int t = 0; t < N; ++t, row += m) {
    K.block(row, ui(t), m, m) = R;
    K.block(row, pi(t), m, n) = -B.transpose();
  }
  K.block(row, pi(N - 1), n, n) = I;

  LqSolution out;
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) {
    out.status = SolveStatus::kSingular;
    return out;
  }
  const Vector z = lu.solve(rhs);
  out.residual = (K * z - rhs).norm();
  out.trajectory.states.push_back(x0);
  for (int t = 1; t <= N; ++t) out.trajectory.states.push_back(z.segment(xi(t), n));
  for (int t = 0; t < N; ++t) {
    out.trajectory.controls.push_back(z.segment(ui(t), m));
    out.adjoints.push_back(z.segment(pi(t), n));
  }
  out.nu = Vector(0);
  out.cost = lq_cost(Q, R, out.trajectory);
  return out;
}

/// Relative least-squares residual above which the stacked transfer system
/// is declared inconsistent: ||K z - rhs|| > 1e-7 (1 + ||rhs||).
inline constexpr double kInfeasibleThreshold = 1e-7;

namespace detail {

// Solves the fixed-endpoint normal system with constraint rows F (q x mN,
// may be empty). F must have independent rows; the caller reduces it.
inline LqSolution solve_transfer_system(const Matrix& A, const Matrix& B,
                                        const Matrix& Q, const Matrix& R, int N,
                                        const Vector& x0, const Vector& xf,
                                        const Matrix& F) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int q = static_cast<int>(F.rows());
  // Unknowns: x_1..x_{N-1}, u_0..u_{N-1}, p_0..p_{N-1}, nu.
  const auto xi = [&](int t) { return (t - 1) * n; };
  const auto ui = [&](int t) { return (N - 1) * n + t * m; };
  const auto pi = [&](int t) { return (N - 1) * n + N * m + t * n; };
  const int nu_at = (N - 1) * n + N * m + N * n;
  const int size = nu_at + q;

  Matrix K = Matrix::Zero(size, size);
  Vector rhs = Vector::Zero(size);
  const Matrix I = Matrix::Identity(n, n);
  int row = 0;
  for (int t = 0; t < N; ++t, row += n) {
    if (t + 1 <= N - 1)
      K.block(row, xi(t + 1), n, n) = I;
    else
      rhs.segment(row, n) -= xf;
    if (t >= 1)
      K.block(row, xi(t), n, n) = -A;
    else
      rhs.segment(row, n) += A * x0;
    K.block(row, ui(t), n, m) = -B;
  }
  for (int t = 1; t < N; ++t, row += n) {
    K.block(row, pi(t - 1), n, n) = I;
    K.block(row, pi(t), n, n) = -A.transpose();
    K.block(row, xi(t), n, n) = Q;
  }
  for (int t = 0; t < N; ++t, row += m) {
    K.block(row, ui(t), m, m) = R;
    K.block(row, pi(t), m, n) = -B.transpose();
    if (q > 0) K.block(row, nu_at, m, q) = F.middleCols(t * m, m).transpose();
  }
  for (int t = 0; t < N && q > 0; ++t) K.block(row, ui(t), q, m) = F.middleCols(t * m, m);

  // Minimum-norm least squares: (x, u) are unique whenever the transfer is
  // feasible; any freedom left is in the multipliers.
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(K);
  const Vector z = cod.solve(rhs);

  LqSolution out;
  out.residual = (K * z - rhs).norm();
  out.trajectory.states.push_back(x0);
  for (int t = 1; t < N; ++t) out.trajectory.states.push_back(z.segment(xi(t), n));
  out.trajectory.states.push_back(xf);
  for (int t = 0; t < N; ++t) {
    out.trajectory.controls.push_back(z.segment(ui(t), m));
    out.adjoints.push_back(z.segment(pi(t), n));
  }
  out.nu = z.segment(nu_at, q);
  out.cost = lq_cost(Q, R, out.trajectory);
  out.status = out.residual > kInfeasibleThreshold * (1.0 + rhs.norm())
                   ? SolveStatus::kInfeasible
                   : SolveStatus::kSolved;
  return out;
}

}  // namespace detail

inline LqSolution lq_transfer_solve(const Matrix& A, const Matrix& B, const Matrix& Q,
                                    const Matrix& R, int horizon, const Vector& x0,
                                    const Vector& xf) {
  detail::check_lq_shapes(A, B, Q, R, horizon, x0);
  if (xf.size() != A.rows()) throw Error(ErrorCode::kShape, "xf dimension mismatch");
  return detail::solve_transfer_system(A, B, Q, R, horizon, x0, xf,
                                       Matrix(0, B.cols() * horizon));
}

/// Fixed-endpoint transfer with banned frequencies. Refuses to run when
/// classify_normality_freq() finds every extremal abnormal. Dependent rows
/// of the constraint are handled by solving with the row-reduced map and
/// returning the minimum-norm nu for the rows of `fc` as given.
inline LqSolution lq_transfer_freq_solve(const Matrix& A, const Matrix& B,
                                         const Matrix& Q, const Matrix& R, int horizon,
                                         const Vector& x0, const Vector& xf,
                                         const FrequencyConstraint& fc) {
  detail::check_lq_shapes(A, B, Q, R, horizon, x0);
  if (xf.size() != A.rows()) throw Error(ErrorCode::kShape, "xf dimension mismatch");
  if (fc.horizon() != horizon || fc.control_dim() != B.cols())
    throw Error(ErrorCode::kShape, "frequency constraint does not match (B, N)");

  if (fc.row_count() > 0) {
    const auto verdict = classify_normality_freq(A, B, horizon, fc);
    if (verdict.classification == NormalityVerdict::Classification::kAllAbnormal) {
      LqSolution out;
      out.status = SolveStatus::kAbnormalRegime;
      return out;
    }
  }

  if (fc.full_row_rank())
    return detail::solve_transfer_system(A, B, Q, R, horizon, x0, xf, fc.stacked());

  const FrequencyConstraint red = fc.reduced();
  LqSolution out =
      detail::solve_transfer_system(A, B, Q, R, horizon, x0, xf, red.stacked());
  // F' nu = F_red' nu_red; pick the smallest such nu.
  const Vector target = red.stacked().transpose() * out.nu;
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(fc.stacked().transpose());
  out.nu = cod.solve(target);
  return out;
}

/// Lift for a fixed-endpoint LQ solution: eta_c = 1, interior multipliers
/// zero, endpoint multipliers read off the transversality conditions.
inline ExtremalLift transfer_lift(const Matrix& A, const Matrix& Q,
                                  const LqSolution& sol) {
  const int N = sol.trajectory.horizon();
  ExtremalLift lift;
  lift.eta_c = 1.0;
  lift.nu = sol.nu;
  lift.adjoints = sol.adjoints;
  lift.state_multipliers.assign(N + 1, Vector::Zero(A.rows()));
  lift.state_multipliers[0] =
      A.transpose() * sol.adjoints[0] - Q * sol.trajectory.states[0];
  lift.state_multipliers[N] = -sol.adjoints[N - 1];
  return lift;
}

/// Lift for a free-final-state LQ solution (p_{N-1} = 0 = -eta^x_N).
inline ExtremalLift free_endpoint_lift(const Matrix& A, const Matrix& Q,
                                       const LqSolution& sol) {
  ExtremalLift lift = transfer_lift(A, Q, sol);
  lift.state_multipliers.back().setZero();
  return lift;
}

/// Lift for a Riccati rollout: adjoints from p_{N-1} = 0,
/// p_{t-1} = A'p_t - Q x_t.
inline ExtremalLift riccati_lift(const Matrix& A, const Matrix& Q, const RiccatiResult& r) {
  const int N = r.trajectory.horizon();
  LqSolution sol;
  sol.trajectory = r.trajectory;
  sol.cost = r.solution.cost;
  sol.adjoints.assign(N, Vector::Zero(A.rows()));
  for (int t = N - 1; t >= 1; --t)
    sol.adjoints[t - 1] = A.transpose() * sol.adjoints[t] - Q * r.trajectory.states[t];
  return free_endpoint_lift(A, Q, sol);
}

}  // namespace pmpfreq
