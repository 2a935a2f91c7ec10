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

// Newton iteration on the two-point boundary value problem of the normal
// extremal equations (eta_c = 1) for fixed-endpoint transfers of LTI and
// control-affine systems with free controls and banned frequencies.
//
// Unknowns z = (x_1..x_{N-1}, u_0..u_{N-1}, p_0..p_{N-1}, nu), residual
//
//   (a) x_{t+1} - f_t(x_t, u_t)                     t = 0..N-1, x_0, x_N fixed
//   (b) p_{t-1} - f_x(t)'p_t + c_x(t)               t = 1..N-1
//   (c) f_u(t)'p_t - c_u(t) - F_t'nu                t = 0..N-1
//   (d) sum_t F_t u_t
//
// Both have length (N-1)n + Nm + Nn + q. With fixed endpoints p_0 and
// p_{N-1} carry no boundary condition; the two fixed endpoints supply the
// matching rows inside block (a).

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pmpfreq/core.hpp"
#include "pmpfreq/extremal.hpp"
#include "pmpfreq/lq.hpp"
#include "pmpfreq/problem.hpp"

namespace pmpfreq {

struct UnknownLayout {
  int state_dim = 0;
  int control_dim = 0;
  int horizon = 0;
  int multipliers = 0;  // q

  Eigen::Index state(int t) const { return static_cast<Eigen::Index>(t - 1) * state_dim; }
  Eigen::Index control(int t) const {
    return static_cast<Eigen::Index>(horizon - 1) * state_dim +
           static_cast<Eigen::Index>(t) * control_dim;
  }
  Eigen::Index adjoint(int t) const {
    return static_cast<Eigen::Index>(horizon - 1) * state_dim +
           static_cast<Eigen::Index>(horizon) * control_dim +
           static_cast<Eigen::Index>(t) * state_dim;
  }
  Eigen::Index nu() const { return adjoint(horizon); }
  Eigen::Index size() const { return nu() + multipliers; }
};

struct StackedUnknowns {
  UnknownLayout layout;
  Vector z;

  static StackedUnknowns zeros(const UnknownLayout& layout) {
    return {layout, Vector::Zero(layout.size())};
  }

  /// Packs x_1..x_{N-1} of `traj` (endpoints are implied), its controls,
  /// adjoints and nu.
  static StackedUnknowns pack(const UnknownLayout& layout, const Trajectory& traj,
                              const std::vector<Vector>& adjoints, const Vector& nu) {
    StackedUnknowns s = zeros(layout);
    const int n = layout.state_dim;
    const int m = layout.control_dim;
    for (int t = 1; t < layout.horizon; ++t) s.z.segment(layout.state(t), n) = traj.states[t];
    for (int t = 0; t < layout.horizon; ++t) {
      s.z.segment(layout.control(t), m) = traj.controls[t];
      s.z.segment(layout.adjoint(t), n) = adjoints[t];
    }
    if (nu.size() != layout.multipliers)
      throw Error(ErrorCode::kShape, "nu length does not match layout");
    s.z.segment(layout.nu(), layout.multipliers) = nu;
    return s;
  }

  Vector state(int t, const Vector& x0, const Vector& xf) const {
    if (t == 0) return x0;
    if (t == layout.horizon) return xf;
    return z.segment(layout.state(t), layout.state_dim);
  }
  Vector control(int t) const { return z.segment(layout.control(t), layout.control_dim); }
  Vector adjoint(int t) const { return z.segment(layout.adjoint(t), layout.state_dim); }
  Vector nu() const { return z.segment(layout.nu(), layout.multipliers); }

  Trajectory trajectory(const Vector& x0, const Vector& xf) const {
    Trajectory traj;
    for (int t = 0; t <= layout.horizon; ++t) traj.states.push_back(state(t, x0, xf));
    for (int t = 0; t < layout.horizon; ++t) traj.controls.push_back(control(t));
    return traj;
  }
};

inline UnknownLayout layout_for(const ProblemSpec& spec) {
  return {spec.state_dim(), spec.control_dim(), spec.horizon,
          spec.constraint().row_count()};
}

namespace detail {

inline void require_shooting_contract(const ProblemSpec& spec) {
  if (!spec.validated())
    throw Error(ErrorCode::kContract, "shooting needs a validated problem spec");
  const auto kind = spec.dynamics.kind();
  if (kind == DynamicsModel::Kind::kGeneral) {
    throw Error(ErrorCode::kContract,
                std::string("shooting supports LTI and CONTROL_AFFINE dynamics, got ") +
                    to_string(kind));
  }
  const int N = spec.horizon;
  for (int t = 0; t <= N; ++t) {
    const auto k = spec.state_sets[t].kind;
    const bool endpoint = t == 0 || t == N;
    if (endpoint && k != StateSet::Kind::kFixed) {
      throw Error(ErrorCode::kContract, "stage " + std::to_string(t) +
                                            ": shooting needs a FIXED endpoint, got " +
                                            (k == StateSet::Kind::kBox ? "BOX" : "FREE"));
    }
    if (!endpoint && k != StateSet::Kind::kFree) {
      throw Error(ErrorCode::kContract, "stage " + std::to_string(t) +
                                            ": shooting needs FREE interior state sets, got " +
                                            (k == StateSet::Kind::kBox ? "BOX" : "FIXED"));
    }
  }
  for (int t = 0; t < N; ++t) {
    if (spec.control_sets[t].kind != ControlSet::Kind::kFree)
      throw Error(ErrorCode::kContract, "stage " + std::to_string(t) +
                                            ": shooting needs FREE control sets, got BOX");
  }
}

}  // namespace detail

inline Vector assemble_residual(const StackedUnknowns& s, const ProblemSpec& spec,
                                const Vector& x0, const Vector& xf) {
  detail::require_shooting_contract(spec);
  const auto& L = s.layout;
  const int n = L.state_dim;
  const int m = L.control_dim;
  const int N = L.horizon;
  const int q = L.multipliers;
  if (s.z.size() != L.size() || x0.size() != n || xf.size() != n)
    throw Error(ErrorCode::kShape, "assemble_residual: dimension mismatch");
  const auto& fc = spec.constraint();
  if (fc.row_count() != q)
    throw Error(ErrorCode::kShape, "assemble_residual: layout q does not match constraint");

  Vector r(static_cast<Eigen::Index>(n) * N + static_cast<Eigen::Index>(n) * (N - 1) +
           static_cast<Eigen::Index>(m) * N + q);
  Eigen::Index row = 0;
  for (int t = 0; t < N; ++t, row += n)
    r.segment(row, n) = s.state(t + 1, x0, xf) - spec.dynamics(t, s.state(t, x0, xf), s.control(t));
  for (int t = 1; t < N; ++t, row += n) {
    const Vector x = s.state(t, x0, xf);
    const Vector u = s.control(t);
    r.segment(row, n) = s.adjoint(t - 1) -
                        spec.dynamics.jacobian_x(t, x, u).transpose() * s.adjoint(t) +
                        spec.cost.gradient_x(t, x, u);
  }
  const Vector nu = s.nu();
  for (int t = 0; t < N; ++t, row += m) {
    const Vector x = s.state(t, x0, xf);
    const Vector u = s.control(t);
    Vector g = spec.dynamics.jacobian_u(t, x, u).transpose() * s.adjoint(t) -
               spec.cost.gradient_u(t, x, u);
    if (q > 0) g -= fc.block(t).transpose() * nu;
    r.segment(row, m) = g;
  }
  if (q > 0) r.segment(row, q) = constraint_residual(fc, s.trajectory(x0, xf).controls);
  return r;
}

namespace detail {

// Second-order pieces of the residual at one stage.
struct StageCurvature {
  Matrix hxx;  // d(f_x'p)/dx - c_xx     (n x n)
  Matrix hxu;  // d(f_x'p)/du - c_xu     (n x m)
  Matrix hux;  // d(f_u'p)/dx - c_ux     (m x n)
  Matrix huu;  // d(f_u'p)/du - c_uu     (m x m)
};

// LTI dynamics and quadratic costs are handled in closed form. Otherwise the
// curvature comes from central differences of the supplied first-order
// derivatives, so only Jacobians and gradients are ever required.
inline StageCurvature stage_curvature(const ProblemSpec& spec, int t, const Vector& x,
                                      const Vector& u, const Vector& p) {
  const int n = spec.state_dim();
  const int m = spec.control_dim();
  StageCurvature c{Matrix::Zero(n, n), Matrix::Zero(n, m), Matrix::Zero(m, n),
                   Matrix::Zero(m, m)};
  if (spec.dynamics.kind() != DynamicsModel::Kind::kLti) {
    const auto& dyn = spec.dynamics;
    c.hxx = finite_difference_jacobian(
        [&](const Vector& xx) -> Vector { return dyn.jacobian_x(t, xx, u).transpose() * p; }, x);
    c.hxu = finite_difference_jacobian(
        [&](const Vector& uu) -> Vector { return dyn.jacobian_x(t, x, uu).transpose() * p; }, u);
    c.hux = finite_difference_jacobian(
        [&](const Vector& xx) -> Vector { return dyn.jacobian_u(t, xx, u).transpose() * p; }, x);
    if (spec.dynamics.kind() != DynamicsModel::Kind::kControlAffine) {
      c.huu = finite_difference_jacobian(
          [&](const Vector& uu) -> Vector { return dyn.jacobian_u(t, x, uu).transpose() * p; }, u);
    }
  }
  if (const auto* quad = spec.cost.quadratic()) {
    c.hxx -= 0.5 * (quad->Q + quad->Q.transpose());
    c.huu -= 0.5 * (quad->R + quad->R.transpose());
  } else {
    const auto& cost = spec.cost;
    c.hxx -= finite_difference_jacobian(
        [&](const Vector& xx) { return cost.gradient_x(t, xx, u); }, x);
    c.hxu -= finite_difference_jacobian(
        [&](const Vector& uu) { return cost.gradient_x(t, x, uu); }, u);
    c.hux -= finite_difference_jacobian(
        [&](const Vector& xx) { return cost.gradient_u(t, xx, u); }, x);
    c.huu -= finite_difference_jacobian(
        [&](const Vector& uu) { return cost.gradient_u(t, x, uu); }, u);
  }
  return c;
}

}  // namespace detail

/// d residual / d z, block by block.
inline Matrix residual_jacobian(const StackedUnknowns& s, const ProblemSpec& spec,
                                const Vector& x0, const Vector& xf) {
  detail::require_shooting_contract(spec);
  const auto& L = s.layout;
  const int n = L.state_dim;
  const int m = L.control_dim;
  const int N = L.horizon;
  const int q = L.multipliers;
  const auto& fc = spec.constraint();
  Matrix J = Matrix::Zero(L.size(), L.size());
  const Matrix I = Matrix::Identity(n, n);

  Eigen::Index row = 0;
  for (int t = 0; t < N; ++t, row += n) {
    const Vector x = s.state(t, x0, xf);
    const Vector u = s.control(t);
    if (t + 1 <= N - 1) J.block(row, L.state(t + 1), n, n) = I;
    if (t >= 1) J.block(row, L.state(t), n, n) = -spec.dynamics.jacobian_x(t, x, u);
    J.block(row, L.control(t), n, m) = -spec.dynamics.jacobian_u(t, x, u);
  }
  const Eigen::Index adjoint_rows = row;
  const Eigen::Index stationarity_rows = adjoint_rows + static_cast<Eigen::Index>(n) * (N - 1);
  for (int t = 0; t < N; ++t) {
    const Vector x = s.state(t, x0, xf);
    const Vector u = s.control(t);
    const Vector p = s.adjoint(t);
    const auto curv = detail::stage_curvature(spec, t, x, u, p);
    if (t >= 1) {
      const Eigen::Index r = adjoint_rows + static_cast<Eigen::Index>(t - 1) * n;
      J.block(r, L.adjoint(t - 1), n, n) = I;
      J.block(r, L.adjoint(t), n, n) = -spec.dynamics.jacobian_x(t, x, u).transpose();
      J.block(r, L.state(t), n, n) = -curv.hxx;
      J.block(r, L.control(t), n, m) = -curv.hxu;
    }
    const Eigen::Index r = stationarity_rows + static_cast<Eigen::Index>(t) * m;
    J.block(r, L.adjoint(t), m, n) = spec.dynamics.jacobian_u(t, x, u).transpose();
    J.block(r, L.control(t), m, m) = curv.huu;
    if (t >= 1 && t <= N - 1) J.block(r, L.state(t), m, n) = curv.hux;
    if (q > 0) J.block(r, L.nu(), m, q) = -fc.block(t).transpose();
  }
  if (q > 0) {
    const Eigen::Index r = stationarity_rows + static_cast<Eigen::Index>(N) * m;
    for (int t = 0; t < N; ++t) J.block(r, L.control(t), q, m) = fc.block(t);
  }
  return J;
}

inline Matrix residual_jacobian_fd(const StackedUnknowns& s, const ProblemSpec& spec,
                                   const Vector& x0, const Vector& xf) {
  return finite_difference_jacobian(
      [&](const Vector& z) { return assemble_residual({s.layout, z}, spec, x0, xf); }, s.z);
}

struct NewtonOptions {
  int max_iterations = 60;
  double tolerance = 1e-10;          // on the residual max-norm
  double backtrack = 0.5;
  double min_step = 0x1p-30;         // 2^-30
  bool finite_difference_jacobian = false;
  double certificate_tolerance = 1e-6;
};

struct IterationRecord {
  int iteration = 0;
  double residual = 0.0;  // after the step
  double step = 0.0;      // accepted step length
};

struct Initialization {
  StackedUnknowns unknowns;
  bool fallback = false;  // linearized transfer failed, started from zero
  std::string note;
};

struct ShootingResult {
  Trajectory trajectory;
  ExtremalLift lift;
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  bool converged = false;
  bool init_fallback = false;
  std::vector<IterationRecord> trace;
  std::optional<PmpCertificate> certificate;  // when converged
  double cost = 0.0;
};

/// Starting point: the exact LQ transfer for LTI specs; for control-affine
/// specs the LQ transfer of the linearization A = f_x(x0, 0), B = f_u(x0, 0),
/// with cost curvature at (x0, 0). Falls back to zeros when that transfer
/// has no normal solution.
inline Initialization default_initialization(const ProblemSpec& spec, const Vector& x0,
                                             const Vector& xf) {
  detail::require_shooting_contract(spec);
  const UnknownLayout layout = layout_for(spec);
  const int n = layout.state_dim;
  const int m = layout.control_dim;
  const Vector u0 = Vector::Zero(m);

  Matrix A;
  Matrix B;
  if (const auto* lti = spec.dynamics.lti()) {
    A = lti->A;
    B = lti->B;
  } else {
    A = spec.dynamics.jacobian_x(0, x0, u0);
    B = spec.dynamics.jacobian_u(0, x0, u0);
  }
  Matrix Q;
  Matrix R;
  if (const auto* quad = spec.cost.quadratic()) {
    Q = quad->Q;
    R = quad->R;
  } else {
    const auto& cost = spec.cost;
    Q = finite_difference_jacobian([&](const Vector& x) { return cost.gradient_x(0, x, u0); }, x0);
    R = finite_difference_jacobian([&](const Vector& u) { return cost.gradient_u(0, x0, u); }, u0);
    Q = 0.5 * (Q + Q.transpose());
    R = 0.5 * (R + R.transpose());
    const double qmin = min_eigenvalue(Q);
    if (qmin < 0.0) Q -= qmin * Matrix::Identity(n, n);
    if (!(min_eigenvalue(R) > 0.0)) R = Matrix::Identity(m, m);
  }

  Initialization init;
  const LqSolution lq =
      lq_transfer_freq_solve(A, B, Q, R, spec.horizon, x0, xf, spec.constraint());
  if (lq.status == SolveStatus::kSolved) {
    init.unknowns = StackedUnknowns::pack(layout, lq.trajectory, lq.adjoints, lq.nu);
    return init;
  }
  init.unknowns = StackedUnknowns::zeros(layout);
  init.fallback = true;
  init.note = std::string("linearized transfer returned ") + to_string(lq.status) +
              "; starting from zero";
  return init;
}

inline ExtremalLift lift_from_unknowns(const StackedUnknowns& s, const ProblemSpec& spec,
                                       const Vector& x0, const Vector& xf) {
  const int N = s.layout.horizon;
  const int n = s.layout.state_dim;
  ExtremalLift lift;
  lift.eta_c = 1.0;
  lift.nu = s.nu();
  for (int t = 0; t < N; ++t) lift.adjoints.push_back(s.adjoint(t));
  lift.state_multipliers.assign(N + 1, Vector::Zero(n));
  lift.state_multipliers[0] =
      hamiltonian_gradient_x(1.0, lift.adjoints[0], 0, x0, s.control(0), spec);
  lift.state_multipliers[N] = -lift.adjoints[N - 1];
  (void)xf;
  return lift;
}

/// Damped Newton with backtracking on the residual max-norm. A step is taken
/// only if it does not increase the residual; the first trial is always the
/// full step. Throws ErrorCode::kSingularJacobian when the Newton matrix is
/// rank deficient at an iterate.
inline ShootingResult newton_solve(const ProblemSpec& spec, const Vector& x0,
                                   const Vector& xf,
                                   const std::optional<StackedUnknowns>& init = std::nullopt,
                                   const NewtonOptions& opts = {}) {
  if (!(opts.tolerance > 0.0) || opts.max_iterations < 1)
    throw Error(ErrorCode::kInvalidInput, "Newton options need tolerance > 0 and max_iterations >= 1");
  detail::require_shooting_contract(spec);

  ShootingResult result;
  StackedUnknowns s;
  if (init) {
    s = *init;
    if (s.z.size() != layout_for(spec).size())
      throw Error(ErrorCode::kShape, "initial unknowns do not match the problem layout");
  } else {
    auto d = default_initialization(spec, x0, xf);
    s = std::move(d.unknowns);
    result.init_fallback = d.fallback;
  }

  Vector r = assemble_residual(s, spec, x0, xf);
  double norm = max_abs(r);
  result.initial_residual = norm;
  int k = 0;
  while (norm > opts.tolerance && k < opts.max_iterations) {
    const Matrix J = opts.finite_difference_jacobian ? residual_jacobian_fd(s, spec, x0, xf)
                                                     : residual_jacobian(s, spec, x0, xf);
    Eigen::FullPivLU<Matrix> lu(J);
    if (!lu.isInvertible()) {
      throw Error(ErrorCode::kSingularJacobian,
                  "iteration " + std::to_string(k) + ": Newton matrix rank " +
                      std::to_string(lu.rank()) + " < " + std::to_string(J.rows()) +
                      ", residual " + std::to_string(norm));
    }
    const Vector dz = lu.solve(-r);

    double step = 1.0;
    bool accepted = false;
    StackedUnknowns trial{s.layout, s.z};
    Vector trial_r;
    double trial_norm = norm;
    while (step >= opts.min_step) {
      trial.z = s.z + step * dz;
      trial_r = assemble_residual(trial, spec, x0, xf);
      trial_norm = max_abs(trial_r);
      if (std::isfinite(trial_norm) && trial_norm <= norm) {
        accepted = true;
        break;
      }
      step *= opts.backtrack;
    }
    ++k;
    if (!accepted) {
      result.trace.push_back({k, norm, 0.0});
      break;
    }
    s = trial;
    r = trial_r;
    norm = trial_norm;
    result.trace.push_back({k, norm, step});
  }

  result.iterations = k;
  result.final_residual = norm;
  result.converged = norm <= opts.tolerance;
  result.trajectory = s.trajectory(x0, xf);
  result.lift = lift_from_unknowns(s, spec, x0, xf);
  for (int t = 0; t < spec.horizon; ++t)
    result.cost += spec.cost(t, result.trajectory.states[t], result.trajectory.controls[t]);
  if (result.converged)
    result.certificate =
        verify_pmp(result.trajectory, result.lift, spec, opts.certificate_tolerance);
  return result;
}

}  // namespace pmpfreq
