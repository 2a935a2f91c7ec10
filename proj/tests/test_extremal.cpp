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

#include <gtest/gtest.h>

#include "oracles/normality_oracle.hpp"
#include "pmpfreq/builtin.hpp"
#include "pmpfreq/extremal.hpp"
#include "pmpfreq/lq.hpp"
#include "support/lq_specs.hpp"
#include "support/random.hpp"

namespace pmpfreq {
namespace {

using testing::lq_spec;
using testing::Rng;
using Verdict = NormalityVerdict::Classification;

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

struct Solved {
  ProblemSpec spec;
  LqSolution sol;
  ExtremalLift lift;
};

// Random frequency-constrained transfer that the LQ solver reports SOLVED.
std::optional<Solved> random_solved(Rng& rng, bool with_q = true) {
  const int n = rng.integer(1, 4);
  const int m = rng.integer(1, 2);
  const int N = rng.integer(std::max(2, n), 10);
  const Matrix A = rng.matrix(n, n);
  const Matrix B = rng.matrix(n, m);
  auto spec = lq_spec(A, B, rng.psd(n, n), rng.pd(m), N, rng.vector(n), rng.vector(n),
                      with_q ? rng.banned_sets(N, m, 0.15) : std::vector<std::vector<int>>{});
  const auto& q = *spec.cost.quadratic();
  auto sol = lq_transfer_freq_solve(A, B, q.Q, q.R, N, spec.state_sets[0].point,
                                    spec.state_sets[N].point, spec.constraint());
  if (sol.status != SolveStatus::kSolved) return std::nullopt;
  auto lift = transfer_lift(A, q.Q, sol);
  return Solved{std::move(spec), std::move(sol), std::move(lift)};
}

TEST(Hamiltonian, VanishesForZeroMultipliers) {
  Rng rng(1);
  const auto spec = lq_spec(rng.matrix(2, 2), rng.matrix(2, 1), Matrix::Identity(2, 2),
                            scalar(1), 4, Vector::Zero(2), std::nullopt, {{1, 3}});
  const Vector nu = Vector::Zero(spec.constraint().row_count());
  EXPECT_EQ(evaluate_hamiltonian(0.0, nu, Vector::Zero(2), 2, rng.vector(2), rng.vector(1), spec),
            0.0);
}

TEST(Hamiltonian, DirectSubstitution) {
  const auto spec = lq_spec(Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                            Matrix::Identity(2, 2), Matrix::Identity(2, 2), 3, Vector::Zero(2),
                            std::nullopt);
  const Vector e1 = Vector::Unit(2, 0);
  EXPECT_DOUBLE_EQ(evaluate_hamiltonian(1.0, Vector(0), e1, 0, e1, Vector::Zero(2), spec), 0.5);
}

TEST(Hamiltonian, MatchesFormulaOnRandomInputs) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.integer(1, 4);
    const int m = rng.integer(1, 3);
    const int N = rng.integer(2, 9);
    const Matrix A = rng.matrix(n, n), B = rng.matrix(n, m), Q = rng.psd(n, n), R = rng.pd(m);
    const auto spec =
        lq_spec(A, B, Q, R, N, Vector::Zero(n), std::nullopt, rng.banned_sets(N, m, 0.3));
    const auto& F = spec.constraint();
    const int t = rng.integer(0, N - 1);
    const double eta = rng.uniform(0, 1);
    const Vector nu = rng.vector(F.row_count());
    const Vector p = rng.vector(n), x = rng.vector(n), u = rng.vector(m);
    double expected = p.dot(A * x + B * u) - eta * (0.5 * x.dot(Q * x) + 0.5 * u.dot(R * u));
    for (int j = 0; j < F.row_count(); ++j)
      for (int k = 0; k < m; ++k) expected -= nu(j) * F.stacked()(j, t * m + k) * u(k);
    EXPECT_NEAR(evaluate_hamiltonian(eta, nu, p, t, x, u, spec), expected, 1e-12);
    // Gradients against finite differences of H.
    const auto h_of_u = [&](const Vector& v) {
      return Vector::Constant(1, evaluate_hamiltonian(eta, nu, p, t, x, v, spec));
    };
    const Matrix gu = finite_difference_jacobian(h_of_u, u);
    EXPECT_LE(max_abs(Vector(gu.row(0).transpose() -
                             hamiltonian_gradient_u(eta, nu, p, t, x, u, spec))),
              1e-7);
  }
}

TEST(AdjointBackward, HomogeneousIsZero) {
  Rng rng(3);
  const auto spec = lq_spec(rng.matrix(2, 2), rng.matrix(2, 1), rng.psd(2, 2), scalar(1), 5,
                            Vector::Zero(2), std::nullopt);
  const auto r = riccati_solve(spec.dynamics.lti()->A, spec.dynamics.lti()->B,
                               spec.cost.quadratic()->Q, scalar(1), 5, rng.vector(2));
  const auto p = adjoint_backward(r.trajectory, 0.0, std::vector<Vector>(6, Vector::Zero(2)), spec);
  EXPECT_EQ(max_abs(p), 0.0);
}

TEST(AdjointBackward, ReproducesTransferAdjoints) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.integer(1, 4);
    const int N = rng.integer(n, 10);
    const Matrix A = rng.matrix(n, n), B = rng.matrix(n, 2), Q = rng.psd(n, n);
    const auto spec = lq_spec(A, B, Q, Matrix::Identity(2, 2), N, rng.vector(n), rng.vector(n));
    const auto sol = lq_transfer_solve(A, B, Q, Matrix::Identity(2, 2), N,
                                       spec.state_sets[0].point, spec.state_sets[N].point);
    ASSERT_EQ(sol.status, SolveStatus::kSolved);
    const auto lift = transfer_lift(A, Q, sol);
    const auto p = adjoint_backward(sol.trajectory, 1.0, lift.state_multipliers, spec);
    for (int t = 0; t < N; ++t)
      EXPECT_LE(max_abs(Vector(p[t] - sol.adjoints[t])), 1e-8 * (1.0 + max_abs(sol.adjoints)));
    // LTI specialization p_{t-1} = A'p_t - Q x_t.
    for (int t = 1; t < N; ++t)
      EXPECT_LE(max_abs(Vector(p[t - 1] - (A.transpose() * p[t] - Q * sol.trajectory.states[t]))),
                1e-12 * (1.0 + max_abs(p)));
  }
}

TEST(AdjointBackward, RejectsInconsistentTrajectory) {
  Rng rng(5);
  const auto spec = lq_spec(Matrix::Identity(1, 1), scalar(1), scalar(1), scalar(1), 3,
                            Vector::Zero(1), std::nullopt);
  Trajectory traj;
  traj.states = {Vector::Zero(1), Vector::Ones(1), Vector::Ones(1), Vector::Ones(1)};
  traj.controls = {Vector::Zero(1), Vector::Zero(1), Vector::Zero(1)};
  try {
    adjoint_backward(traj, 1.0, std::vector<Vector>(4, Vector::Zero(1)), spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidInput);
  }
}

TEST(VerifyPmp, SolverOutputsPass) {
  Rng rng(6);
  int checked = 0;
  for (int trial = 0; trial < 80; ++trial) {
    auto s = random_solved(rng);
    if (!s) continue;
    ++checked;
    const auto cert = verify_pmp(s->sol.trajectory, s->lift, s->spec, 1e-7);
    EXPECT_TRUE(cert.pass) << "trial " << trial << " failures " << cert.failures().size()
                           << (cert.failures().empty() ? "" : " first " + cert.failures()[0]);
  }
  EXPECT_GE(checked, 40);
}

TEST(VerifyPmp, FreeEndpointLiftsPass) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.integer(1, 4), m = rng.integer(1, 3), N = rng.integer(1, 12);
    const Matrix A = rng.matrix(n, n), B = rng.matrix(n, m), Q = rng.psd(n, n), R = rng.pd(m);
    const Vector x0 = rng.vector(n);
    const auto spec = lq_spec(A, B, Q, R, N, x0, std::nullopt);
    const auto sol = lq_pmp_solve(A, B, Q, R, N, x0);
    EXPECT_TRUE(verify_pmp(sol.trajectory, free_endpoint_lift(A, Q, sol), spec, 1e-7).pass);
  }
}

TEST(VerifyPmp, RiccatiLiftsPass) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.integer(1, 4), m = rng.integer(1, 3), N = rng.integer(1, 12);
    const Matrix A = rng.matrix(n, n), B = rng.matrix(n, m), Q = rng.psd(n, n), R = rng.pd(m);
    const Vector x0 = rng.vector(n);
    const auto spec = lq_spec(A, B, Q, R, N, x0, std::nullopt);
    const auto r = riccati_solve(A, B, Q, R, N, x0);
    const auto lift = riccati_lift(A, Q, r);
    EXPECT_TRUE(lift.state_multipliers.back().isZero());
    EXPECT_TRUE(verify_pmp(r.trajectory, lift, spec, 1e-7).pass) << "trial " << trial;
  }
}

TEST(VerifyPmp, PerturbedControlFailsStationarity) {
  Rng rng(8);
  int checked = 0;
  for (int trial = 0; trial < 40 && checked < 15; ++trial) {
    auto s = random_solved(rng);
    if (!s) continue;
    ++checked;
    const int N = s->spec.horizon;
    const int m = s->spec.control_dim();
    for (int t = 0; t < N; ++t) {
      for (int k = 0; k < m; ++k) {
        Trajectory bent = s->sol.trajectory;
        bent.controls[t](k) += 1e-3;
        const auto cert = verify_pmp(bent, s->lift, s->spec, 1e-7);
        EXPECT_FALSE(cert.hamiltonian_vi.pass);
        EXPECT_GT(cert.hamiltonian_vi.residual, 1e-4 * s->spec.cost.quadratic()->R(k, k) / 2);
        EXPECT_FALSE(cert.pass);
      }
    }
  }
  EXPECT_GE(checked, 10);
}

TEST(VerifyPmp, ZeroLiftIsTrivial) {
  Rng rng(9);
  auto s = random_solved(rng, false);
  while (!s) s = random_solved(rng, false);
  const auto zero = scaled(s->lift, 0.0);
  const auto cert = verify_pmp(s->sol.trajectory, zero, s->spec, 1e-7);
  EXPECT_FALSE(cert.nontrivial);
  EXPECT_FALSE(cert.pass);
}

TEST(VerifyPmp, NegativeEtaFails) {
  Rng rng(10);
  auto s = random_solved(rng, false);
  while (!s) s = random_solved(rng, false);
  auto lift = s->lift;
  lift.eta_c = -1.0;
  EXPECT_FALSE(verify_pmp(s->sol.trajectory, lift, s->spec, 1e-7).nonneg);
}

TEST(VerifyPmp, PositiveHomogeneity) {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    auto s = random_solved(rng);
    if (!s) continue;
    auto lift = s->lift;
    auto traj = s->sol.trajectory;
    if (trial % 3 == 1) lift.adjoints[0] *= 1.01;  // break the adjoint recursion
    if (trial % 3 == 2) traj.controls.back()(0) += 0.5;
    const auto base = verify_pmp(traj, lift, s->spec, 1e-7);
    for (double lambda : {1e-6, 0.37, 1.0, 12.0, 5e5}) {
      const auto cert = verify_pmp(traj, scaled(lift, lambda), s->spec, 1e-7);
      EXPECT_EQ(cert.failures(), base.failures()) << "lambda " << lambda;
      EXPECT_EQ(cert.pass, base.pass);
    }
  }
}

TEST(VerifyPmp, ShapeMismatchThrows) {
  Rng rng(12);
  auto s = random_solved(rng, false);
  while (!s) s = random_solved(rng, false);
  auto lift = s->lift;
  lift.adjoints.pop_back();
  EXPECT_THROW(verify_pmp(s->sol.trajectory, lift, s->spec, 1e-7), Error);
}

// u in [-1, 1], x_0 = 0, x_2 = 2: the only feasible control is u = (1, 1),
// both at the upper bound. The VI holds iff dH/du = p - u >= 0.
TEST(VerifyPmp, BoxControlVariationalInequality) {
  auto spec = make_transfer_spec(2, LtiDynamics{scalar(1), scalar(1)},
                                 QuadraticCost{scalar(0), scalar(1)}, Vector::Zero(1),
                                 Vector::Constant(1, 2.0));
  for (auto& c : spec.control_sets) c = ControlSet::box(Vector::Constant(1, -1), Vector::Ones(1));
  spec = *validate(spec).spec;
  Trajectory traj;
  traj.states = {Vector::Zero(1), Vector::Ones(1), Vector::Constant(1, 2.0)};
  traj.controls = {Vector::Ones(1), Vector::Ones(1)};
  auto lift_for = [&](double p) {
    ExtremalLift lift;
    lift.eta_c = 1.0;
    lift.adjoints = {Vector::Constant(1, p), Vector::Constant(1, p)};
    lift.state_multipliers = {Vector::Constant(1, p), Vector::Zero(1), Vector::Constant(1, -p)};
    return lift;
  };
  EXPECT_TRUE(verify_pmp(traj, lift_for(1.5), spec, 1e-9).pass);
  EXPECT_TRUE(verify_pmp(traj, lift_for(1.0), spec, 1e-9).pass);
  const auto bad = verify_pmp(traj, lift_for(0.5), spec, 1e-9);
  EXPECT_FALSE(bad.hamiltonian_vi.pass);
  EXPECT_NEAR(bad.hamiltonian_vi.residual, 0.5, 1e-15);
}

TEST(DualCone, FreeFixedBox) {
  Vector lo(3), hi(3), x(3), eta(3);
  lo << 0, 0, 0;
  hi << 1, 1, 0;
  x << 0, 1, 0;  // lower active, upper active, both active
  const auto box = StateSet::box(lo, hi);
  eta << -2, 3, 7;
  EXPECT_EQ(detail::dual_cone_violation(box, x, eta, 1e-9), 0.0);
  eta << 1, 0, 0;
  EXPECT_EQ(detail::dual_cone_violation(box, x, eta, 1e-9), 1.0);
  eta << 0, -2, 0;
  EXPECT_EQ(detail::dual_cone_violation(box, x, eta, 1e-9), 2.0);
  x << 0.5, 1, 0;  // first coordinate inactive
  eta << 0.25, 0, 0;
  EXPECT_EQ(detail::dual_cone_violation(box, x, eta, 1e-9), 0.25);
  EXPECT_EQ(detail::dual_cone_violation(StateSet::free(), x, eta, 1e-9), 0.25);
  EXPECT_EQ(detail::dual_cone_violation(StateSet::fixed(x), x, eta, 1e-9), 0.0);
}

TEST(NormalityClassic, Examples) {
  EXPECT_EQ(classify_normality_classic(Matrix::Identity(2, 2), Matrix::Identity(2, 2), 2)
                .classification,
            Verdict::kAllNormal);
  Matrix A(2, 2), B(2, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  const auto v = classify_normality_classic(A, B, 3);
  EXPECT_EQ(v.rank_reachability, 2);
  EXPECT_EQ(v.classification, Verdict::kAllNormal);
  Matrix B1(2, 1);
  B1 << 1, 0;
  const auto u = classify_normality_classic(Matrix::Identity(2, 2), B1, 5);
  EXPECT_EQ(u.rank_reachability, 1);
  EXPECT_EQ(u.classification, Verdict::kUndetermined);
  // Short horizon: controllable but N < n.
  EXPECT_EQ(classify_normality_classic(A, B, 1).classification, Verdict::kUndetermined);
}

TEST(NormalityFreq, Examples) {
  const auto d = builtin::double_integrator();
  const auto none = classify_normality_freq(d.A, d.B, 4, FrequencyConstraint::none(4, 1));
  EXPECT_EQ(none.classification, Verdict::kAllNormal);

  const auto both = build_frequency_constraint(SupportSpec::from_banned(2, {{0, 1}}), 2, 1);
  const auto v = classify_normality_freq(scalar(1), scalar(1), 2, both);
  EXPECT_EQ(v.constraint_rows, 2);
  EXPECT_EQ(v.classification, Verdict::kAllAbnormal);

  const auto nyquist = build_frequency_constraint(SupportSpec::from_banned(4, {{2}}), 4, 1);
  const auto w = classify_normality_freq(scalar(1), scalar(1), 4, nyquist);
  EXPECT_EQ(w.constraint_rows, 1);
  // Explicit 4x2 matrix: R_stack = ones, G = (1/2)(1, -1, 1, -1)'.
  Matrix M(4, 2);
  M << 1, -0.5, 1, 0.5, 1, -0.5, 1, 0.5;
  Eigen::JacobiSVD<Matrix> svd(M);
  EXPECT_GT(svd.singularValues()(1), 0.5);
  EXPECT_EQ(w.rank_augmented, 2);
  EXPECT_EQ(w.classification, Verdict::kAllNormal);

  // Banning the DC component of a scalar integrator: sum u = 0 makes x_N = x_0
  // the only reachable target, and p_{N-1} = nu / sqrt(N) is an abnormal lift.
  const auto dc = build_frequency_constraint(SupportSpec::from_banned(4, {{0}}), 4, 1);
  EXPECT_EQ(classify_normality_freq(scalar(1), scalar(1), 4, dc).classification,
            Verdict::kUndetermined);
}

oracle::Normality as_oracle(Verdict v) {
  switch (v) {
    case Verdict::kAllNormal: return oracle::Normality::kAllNormal;
    case Verdict::kAllAbnormal: return oracle::Normality::kAllAbnormal;
    case Verdict::kUndetermined: return oracle::Normality::kUndetermined;
  }
  return oracle::Normality::kUndetermined;
}

TEST(NormalityFreq, AgreesWithBruteForce) {
  Rng rng(13);
  int counts[3] = {0, 0, 0};
  for (int trial = 0; trial < 150; ++trial) {
    const int n = rng.integer(1, 4);
    const int m = rng.integer(1, 2);
    const int N = rng.integer(1, 8);
    Matrix A = rng.matrix(n, n);
    Matrix B = rng.matrix(n, m);
    if (trial % 5 == 0 && n > 1) B.row(n - 1).setZero(), A.row(n - 1).head(n - 1).setZero();
    const double p = trial % 4 == 0 ? 0.8 : 0.2;
    const auto fc = build_frequency_constraint(
        SupportSpec::from_banned(N, rng.banned_sets(N, m, p)), N, m);
    const auto v = classify_normality_freq(A, B, N, fc);
    const auto o = oracle::brute_force_normality(A, B, N, fc.stacked());
    EXPECT_EQ(v.constraint_rows, o.q);
    EXPECT_EQ(as_oracle(v.classification), o.verdict) << "trial " << trial;
    ++counts[static_cast<int>(v.classification)];
  }
  EXPECT_GE(counts[static_cast<int>(Verdict::kAllNormal)], 5);
  EXPECT_GE(counts[static_cast<int>(Verdict::kAllAbnormal)], 5);
}

}  // namespace
}  // namespace pmpfreq
