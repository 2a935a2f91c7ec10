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

// First-order necessary conditions for the frequency-constrained problem.
//
// Hamiltonian, with cost multiplier eta_c, frequency multiplier nu and
// adjoint p:
//
//   H(p, t, x, u) = <p, f_t(x, u)> - eta_c c_t(x, u) - <nu, F_t u>
//
// An extremal lift pairs a trajectory with (eta_c, nu, p_0..p_{N-1},
// eta^x_0..eta^x_N). The conditions checked by verify_pmp():
//
//   (i)   eta_c >= 0
//   (ii)  (p_t) and (eta_c, nu) not all zero
//   (iii) x_{t+1} = f_t(x_t, u_t);
//         p_{t-1} = dH/dx(p_t, t, x_t, u_t) - eta^x_t,        t = 1..N-1
//   (iv)  dH/dx(p_0, 0, x_0, u_0) - eta^x_0 = 0;  p_{N-1} = -eta^x_N
//   (v)   <dH/du, du> <= 0 for every du entering U_t at u_t
//   (vi)  sum_t F_t u_t = 0
//
// Every eta^x_t must lie in the dual cone (covectors non-positive on the
// tangent cone) of the stage's state set: {0} for FREE, everything for
// FIXED, sign-restricted on active coordinates for BOX.
//
// Residuals that involve the lift pass when r <= tol * scale, where scale is
// the largest max-norm among the terms entering the residual. Scaling the
// lift by any lambda > 0 scales both sides, so verdicts are invariant.
// Residuals that only involve the trajectory pass when
// r <= tol * (1 + scale).

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "pmpfreq/core.hpp"
#include "pmpfreq/problem.hpp"
#include "pmpfreq/spectrum.hpp"

namespace pmpfreq {

struct ExtremalLift {
  double eta_c = 1.0;
  Vector nu;                              // q
  std::vector<Vector> adjoints;           // p_0..p_{N-1}
  std::vector<Vector> state_multipliers;  // eta^x_0..eta^x_N
};

inline ExtremalLift scaled(const ExtremalLift& lift, double lambda) {
  ExtremalLift out = lift;
  out.eta_c *= lambda;
  out.nu *= lambda;
  for (auto& p : out.adjoints) p *= lambda;
  for (auto& e : out.state_multipliers) e *= lambda;
  return out;
}

namespace detail {

inline Vector frequency_term(const ProblemSpec& spec, const Vector& nu, int t) {
  const int m = spec.control_dim();
  if (nu.size() == 0) return Vector::Zero(m);
  const auto& fc = spec.constraint();
  if (nu.size() != fc.row_count()) {
    throw Error(ErrorCode::kShape,
                "nu has length " + std::to_string(nu.size()) + ", constraint has " +
                    std::to_string(fc.row_count()) + " rows");
  }
  return fc.block(t).transpose() * nu;
}

}  // namespace detail

inline double evaluate_hamiltonian(double eta_c, const Vector& nu, const Vector& p,
                                   int t, const Vector& x, const Vector& u,
                                   const ProblemSpec& spec) {
  const double freq = nu.size() == 0 ? 0.0 : detail::frequency_term(spec, nu, t).dot(u);
  return p.dot(spec.dynamics(t, x, u)) - eta_c * spec.cost(t, x, u) - freq;
}

/// dH/du = f_u' p - eta_c c_u - F_t' nu.
inline Vector hamiltonian_gradient_u(double eta_c, const Vector& nu, const Vector& p,
                                     int t, const Vector& x, const Vector& u,
                                     const ProblemSpec& spec) {
  return spec.dynamics.jacobian_u(t, x, u).transpose() * p -
         eta_c * spec.cost.gradient_u(t, x, u) - detail::frequency_term(spec, nu, t);
}

/// dH/dx = f_x' p - eta_c c_x.
inline Vector hamiltonian_gradient_x(double eta_c, const Vector& p, int t,
                                     const Vector& x, const Vector& u,
                                     const ProblemSpec& spec) {
  return spec.dynamics.jacobian_x(t, x, u).transpose() * p -
         eta_c * spec.cost.gradient_x(t, x, u);
}

inline double dynamics_residual(const Trajectory& traj, const DynamicsModel& dyn) {
  double r = 0.0;
  for (int t = 0; t < traj.horizon(); ++t)
    r = std::max(r, max_abs(Vector(traj.states[t + 1] -
                                   dyn(t, traj.states[t], traj.controls[t]))));
  return r;
}

inline constexpr double kAdjointInputTolerance = 1e-8;

/// Backward adjoint pass: p_{N-1} = -eta^x_N and
/// p_{t-1} = f_x(t)' p_t - eta_c c_x(t) - eta^x_t for t = N-1..1.
/// `state_multipliers` holds eta^x_0..eta^x_N; eta^x_0 is not used.
inline std::vector<Vector> adjoint_backward(const Trajectory& traj, double eta_c,
                                            const std::vector<Vector>& state_multipliers,
                                            const ProblemSpec& spec) {
  const int N = traj.horizon();
  if (static_cast<int>(traj.states.size()) != N + 1 ||
      static_cast<int>(state_multipliers.size()) != N + 1) {
    throw Error(ErrorCode::kShape, "adjoint_backward: sequence lengths disagree");
  }
  const double scale = std::max(1.0, max_abs(traj.states));
  const double r = dynamics_residual(traj, spec.dynamics);
  if (r > kAdjointInputTolerance * scale) {
    throw Error(ErrorCode::kInvalidInput,
                "trajectory violates the dynamics (residual " + std::to_string(r) + ")");
  }
  std::vector<Vector> p(N);
  p[N - 1] = -state_multipliers[N];
  for (int t = N - 1; t >= 1; --t) {
    p[t - 1] = hamiltonian_gradient_x(eta_c, p[t], t, traj.states[t], traj.controls[t],
                                      spec) -
               state_multipliers[t];
  }
  return p;
}

struct ConditionCheck {
  double residual = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct PmpCertificate {
  double tolerance = 0.0;
  bool nonneg = true;                    // (i)
  bool nontrivial = true;                // (ii)
  ConditionCheck state_dynamics;         // (iii)
  ConditionCheck adjoint_dynamics;       // (iii)
  ConditionCheck transversality;         // (iv)
  ConditionCheck dual_cone;              // eta^x membership, (iii)/(iv)
  ConditionCheck hamiltonian_vi;         // (v), most positive directional derivative
  ConditionCheck frequency;              // (vi)
  ConditionCheck feasibility;            // x_t in X_t, u_t in U_t
  bool pass = false;

  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    if (!nonneg) out.emplace_back("nonneg");
    if (!nontrivial) out.emplace_back("nontrivial");
    if (!state_dynamics.pass) out.emplace_back("state_dynamics");
    if (!adjoint_dynamics.pass) out.emplace_back("adjoint_dynamics");
    if (!transversality.pass) out.emplace_back("transversality");
    if (!dual_cone.pass) out.emplace_back("dual_cone");
    if (!hamiltonian_vi.pass) out.emplace_back("hamiltonian_vi");
    if (!frequency.pass) out.emplace_back("frequency");
    if (!feasibility.pass) out.emplace_back("feasibility");
    return out;
  }
};

namespace detail {

inline ConditionCheck relative_check(double residual, double scale, double tol) {
  return {residual, tol * scale, residual <= tol * scale};
}

inline ConditionCheck absolute_check(double residual, double scale, double tol) {
  return {residual, tol * (1.0 + scale), residual <= tol * (1.0 + scale)};
}

// Distance of eta from the dual cone of the tangent cone of `set` at x.
inline double dual_cone_violation(const StateSet& set, const Vector& x,
                                  const Vector& eta, double tol) {
  switch (set.kind) {
    case StateSet::Kind::kFree: return max_abs(eta);
    case StateSet::Kind::kFixed: return 0.0;
    case StateSet::Kind::kBox: {
      double v = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const bool at_lower =
            std::abs(x(i) - set.lower(i)) <= tol * (1.0 + std::abs(set.lower(i)));
        const bool at_upper =
            std::abs(x(i) - set.upper(i)) <= tol * (1.0 + std::abs(set.upper(i)));
        if (at_lower && at_upper) continue;
        if (at_lower)
          v = std::max(v, eta(i));
        else if (at_upper)
          v = std::max(v, -eta(i));
        else
          v = std::max(v, std::abs(eta(i)));
      }
      return v;
    }
  }
  return 0.0;
}

// Largest <g, d> over the signed coordinate directions d that enter U at u.
inline double worst_directional_derivative(const ControlSet& set, const Vector& u,
                                           const Vector& g, double tol) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    bool up = true;
    bool down = true;
    if (set.kind == ControlSet::Kind::kBox) {
      up = u(i) < set.upper(i) - tol * (1.0 + std::abs(set.upper(i)));
      down = u(i) > set.lower(i) + tol * (1.0 + std::abs(set.lower(i)));
    }
    if (up) worst = std::max(worst, g(i));
    if (down) worst = std::max(worst, -g(i));
  }
  return worst;
}

}  // namespace detail

inline PmpCertificate verify_pmp(const Trajectory& traj, const ExtremalLift& lift,
                                 const ProblemSpec& spec, double tol) {
  const int N = traj.horizon();
  const int n = spec.state_dim();
  const int m = spec.control_dim();
  if (N != spec.horizon || static_cast<int>(traj.states.size()) != N + 1 ||
      static_cast<int>(lift.adjoints.size()) != N ||
      static_cast<int>(lift.state_multipliers.size()) != N + 1) {
    throw Error(ErrorCode::kShape, "verify_pmp: sequence lengths do not match horizon");
  }
  for (int t = 0; t <= N; ++t) {
    if (traj.states[t].size() != n || lift.state_multipliers[t].size() != n)
      throw Error(ErrorCode::kShape, "verify_pmp: state dimension mismatch");
    if (t < N && (traj.controls[t].size() != m || lift.adjoints[t].size() != n))
      throw Error(ErrorCode::kShape, "verify_pmp: control/adjoint dimension mismatch");
  }
  const auto& fc = spec.constraint();
  if (lift.nu.size() != 0 && lift.nu.size() != fc.row_count())
    throw Error(ErrorCode::kShape, "verify_pmp: nu length does not match constraint");

  PmpCertificate cert;
  cert.tolerance = tol;
  const double eta = lift.eta_c;
  const auto& x = traj.states;
  const auto& u = traj.controls;
  const auto& p = lift.adjoints;
  const auto& ex = lift.state_multipliers;

  cert.nonneg = eta >= 0.0;
  cert.nontrivial = eta != 0.0 || max_abs(lift.nu) != 0.0 || max_abs(p) != 0.0;

  const double traj_scale = std::max(max_abs(x), max_abs(u));

  {
    double r = 0.0;
    double scale = traj_scale;
    for (int t = 0; t < N; ++t) {
      const Vector f = spec.dynamics(t, x[t], u[t]);
      scale = std::max(scale, max_abs(f));
      r = std::max(r, max_abs(Vector(x[t + 1] - f)));
    }
    cert.state_dynamics = detail::absolute_check(r, scale, tol);
  }

  {
    double r = 0.0;
    double scale = 0.0;
    for (int t = 1; t < N; ++t) {
      const Vector fxp = spec.dynamics.jacobian_x(t, x[t], u[t]).transpose() * p[t];
      const Vector cx = eta * spec.cost.gradient_x(t, x[t], u[t]);
      scale = std::max({scale, max_abs(p[t - 1]), max_abs(fxp), max_abs(cx),
                        max_abs(ex[t])});
      r = std::max(r, max_abs(Vector(p[t - 1] - fxp + cx + ex[t])));
    }
    cert.adjoint_dynamics = detail::relative_check(r, scale, tol);
  }

  {
    const Vector fxp = spec.dynamics.jacobian_x(0, x[0], u[0]).transpose() * p[0];
    const Vector cx = eta * spec.cost.gradient_x(0, x[0], u[0]);
    const double r0 = max_abs(Vector(fxp - cx - ex[0]));
    const double rN = max_abs(Vector(p[N - 1] + ex[N]));
    const double scale = std::max(
        {max_abs(fxp), max_abs(cx), max_abs(ex[0]), max_abs(p[N - 1]), max_abs(ex[N])});
    cert.transversality = detail::relative_check(std::max(r0, rN), scale, tol);
  }

  {
    double r = 0.0;
    for (int t = 0; t <= N; ++t)
      r = std::max(r, detail::dual_cone_violation(spec.state_sets[t], x[t], ex[t], tol));
    const double scale = std::max({std::abs(eta), max_abs(lift.nu), max_abs(p), max_abs(ex)});
    cert.dual_cone = detail::relative_check(r, scale, tol);
  }

  {
    double worst = 0.0;
    double scale = 0.0;
    for (int t = 0; t < N; ++t) {
      const Vector fup = spec.dynamics.jacobian_u(t, x[t], u[t]).transpose() * p[t];
      const Vector cu = eta * spec.cost.gradient_u(t, x[t], u[t]);
      const Vector ft = detail::frequency_term(spec, lift.nu, t);
      scale = std::max({scale, max_abs(fup), max_abs(cu), max_abs(ft)});
      const Vector g = fup - cu - ft;
      worst = std::max(worst, detail::worst_directional_derivative(
                                  spec.control_sets[t], u[t], g, tol));
    }
    cert.hamiltonian_vi = detail::relative_check(worst, scale, tol);
  }

  cert.frequency =
      detail::absolute_check(max_abs(constraint_residual(fc, u)), max_abs(u), tol);

  {
    double r = 0.0;
    for (int t = 0; t <= N; ++t) r = std::max(r, spec.state_sets[t].violation(x[t]));
    for (int t = 0; t < N; ++t) r = std::max(r, spec.control_sets[t].violation(u[t]));
    cert.feasibility = detail::absolute_check(r, traj_scale, tol);
  }

  cert.pass = cert.nonneg && cert.nontrivial && cert.state_dynamics.pass &&
              cert.adjoint_dynamics.pass && cert.transversality.pass &&
              cert.dual_cone.pass && cert.hamiltonian_vi.pass && cert.frequency.pass &&
              cert.feasibility.pass;
  return cert;
}

struct NormalityVerdict {
  enum class Classification { kAllNormal, kAllAbnormal, kUndetermined };
  Classification classification = Classification::kUndetermined;
  int rank_reachability = 0;
  int rank_augmented = 0;
  int state_dim = 0;
  int control_dim = 0;
  int horizon = 0;
  int constraint_rows = 0;  // q after row reduction
};

inline const char* to_string(NormalityVerdict::Classification c) {
  switch (c) {
    case NormalityVerdict::Classification::kAllNormal: return "ALL_NORMAL";
    case NormalityVerdict::Classification::kAllAbnormal: return "ALL_ABNORMAL";
    case NormalityVerdict::Classification::kUndetermined: return "UNDETERMINED";
  }
  return "?";
}

/// [B, AB, ..., A^{k-1} B].
inline Matrix reachability_matrix(const Matrix& A, const Matrix& B, int k) {
  Matrix out(B.rows(), B.cols() * k);
  Matrix block = B;
  for (int i = 0; i < k; ++i) {
    out.middleCols(i * B.cols(), B.cols()) = block;
    block = A * block;
  }
  return out;
}

/// Controllable pair and N >= n: no abnormal extremals for the fixed-endpoint
/// transfer. Anything else is left undetermined.
inline NormalityVerdict classify_normality_classic(const Matrix& A, const Matrix& B,
                                                   int horizon) {
  if (horizon < 1) throw Error(ErrorCode::kInvalidHorizon, "horizon must be positive");
  NormalityVerdict v;
  v.state_dim = static_cast<int>(A.rows());
  v.control_dim = static_cast<int>(B.cols());
  v.horizon = horizon;
  v.rank_reachability = numerical_rank(reachability_matrix(A, B, v.state_dim));
  v.rank_augmented = v.rank_reachability;
  v.classification = (v.rank_reachability == v.state_dim && horizon >= v.state_dim)
                         ? NormalityVerdict::Classification::kAllNormal
                         : NormalityVerdict::Classification::kUndetermined;
  return v;
}

/// Rows t m .. t m + m - 1 hold B' (A')^{N-1-t}: the transposed N-step
/// reachability matrix in time order.
inline Matrix adjoint_reachability_stack(const Matrix& A, const Matrix& B, int horizon) {
  const Eigen::Index n = A.rows();
  const Eigen::Index m = B.cols();
  Matrix out(m * horizon, n);
  Matrix block = B.transpose();
  for (int t = horizon - 1; t >= 0; --t) {
    out.middleRows(t * m, m) = block;
    block = block * A.transpose();
  }
  return out;
}

/// An abnormal lift needs a nonzero (p_{N-1}, nu) with
/// [R_stack | -G] (p_{N-1}; nu) = 0, G the stacked F_t'. More unknowns than
/// equations forces one; independent columns rule it out.
inline NormalityVerdict classify_normality_freq(const Matrix& A, const Matrix& B,
                                                int horizon,
                                                const FrequencyConstraint& fc) {
  if (horizon < 1) throw Error(ErrorCode::kInvalidHorizon, "horizon must be positive");
  if (fc.horizon() != horizon || fc.control_dim() != B.cols())
    throw Error(ErrorCode::kShape, "frequency constraint does not match (B, N)");
  const FrequencyConstraint red = fc.reduced();
  NormalityVerdict v;
  v.state_dim = static_cast<int>(A.rows());
  v.control_dim = static_cast<int>(B.cols());
  v.horizon = horizon;
  v.constraint_rows = red.row_count();

  const Matrix r_stack = adjoint_reachability_stack(A, B, horizon);
  Matrix augmented(r_stack.rows(), r_stack.cols() + red.row_count());
  augmented << r_stack, -red.stacked().transpose();
  v.rank_reachability = numerical_rank(r_stack);
  v.rank_augmented = numerical_rank(augmented);

  const int unknowns = v.state_dim + v.constraint_rows;
  if (unknowns > v.control_dim * horizon)
    v.classification = NormalityVerdict::Classification::kAllAbnormal;
  else if (v.rank_augmented == unknowns)
    v.classification = NormalityVerdict::Classification::kAllNormal;
  else
    v.classification = NormalityVerdict::Classification::kUndetermined;
  return v;
}

}  // namespace pmpfreq
