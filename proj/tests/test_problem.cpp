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

#include <algorithm>
#include <string>

#include <gtest/gtest.h>

#include "pmpfreq/builtin.hpp"
#include "pmpfreq/problem.hpp"
#include "support/random.hpp"

namespace pmpfreq {
namespace {

using testing::Rng;

ProblemSpec free_lti_spec(int n, int m, int N, Rng& rng) {
  ProblemSpec spec;
  spec.horizon = N;
  spec.dynamics = LtiDynamics{rng.matrix(n, n), rng.matrix(n, m)};
  spec.cost = QuadraticCost{rng.psd(n, n), rng.pd(m)};
  spec.state_sets.assign(N + 1, StateSet::free());
  spec.control_sets.assign(N, ControlSet::free());
  spec.supports = SupportSpec::unconstrained(N, m);
  return spec;
}

bool has_issue(const ValidationResult& r, int stage, const std::string& field,
               const std::string& fragment) {
  return std::any_of(r.issues.begin(), r.issues.end(), [&](const ValidationIssue& i) {
    return i.stage == stage && i.field == field &&
           i.message.find(fragment) != std::string::npos;
  });
}

TEST(Validate, UnconstrainedLtiIsValid) {
  Rng rng(1);
  const auto r = validate(free_lti_spec(2, 1, 4, rng));
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(r.issues.empty());
  EXPECT_EQ(r.spec->constraint().row_count(), 0);
}

TEST(Validate, SingularRRejected) {
  Rng rng(2);
  auto spec = free_lti_spec(2, 2, 4, rng);
  Matrix R = Matrix::Zero(2, 2);
  R(0, 0) = 1.0;
  spec.cost = QuadraticCost{Matrix::Identity(2, 2), R};
  const auto r = validate(spec);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(has_issue(r, -1, "cost.R", "R not positive definite"));
}

TEST(Validate, IndefiniteQRejected) {
  Rng rng(3);
  auto spec = free_lti_spec(2, 1, 3, rng);
  Matrix Q = Matrix::Identity(2, 2);
  Q(1, 1) = -1e-3;
  spec.cost = QuadraticCost{Q, Matrix::Identity(1, 1)};
  EXPECT_TRUE(has_issue(validate(spec), -1, "cost.Q", "Q not positive semidefinite"));
}

TEST(Validate, InvertedBoxNamesStageAndCoordinate) {
  Rng rng(4);
  auto spec = free_lti_spec(3, 1, 4, rng);
  Vector lo(3), hi(3);
  lo << 0, 2, 0;
  hi << 1, 1, 1;
  spec.state_sets[2] = StateSet::box(lo, hi);
  const auto r = validate(spec);
  EXPECT_FALSE(r.ok());
  EXPECT_TRUE(has_issue(r, 2, "state_sets", "coordinate 1"));
  ASSERT_EQ(r.issues.size(), 1u);
  EXPECT_EQ(r.issues[0].to_string().rfind("stage 2, state_sets: lower > upper", 0), 0u);
}

TEST(Validate, CollectsEveryIssue) {
  Rng rng(5);
  auto spec = free_lti_spec(2, 1, 4, rng);
  spec.cost = QuadraticCost{Matrix::Identity(3, 3), Matrix::Zero(1, 1)};
  spec.control_sets[1] = ControlSet::box(Vector::Constant(1, 1.0), Vector::Constant(1, -1.0));
  spec.control_sets.pop_back();
  spec.supports = SupportSpec::unconstrained(4, 2);
  const auto r = validate(spec);
  EXPECT_TRUE(has_issue(r, -1, "cost.Q", "must be 2x2"));
  EXPECT_TRUE(has_issue(r, -1, "cost.R", "R not positive definite"));
  EXPECT_TRUE(has_issue(r, 1, "control_sets", "coordinate 0"));
  EXPECT_TRUE(has_issue(r, -1, "control_sets", "expected 4 entries"));
  EXPECT_TRUE(has_issue(r, -1, "banned_frequencies", "expected 1 channels"));
}

TEST(Validate, BuildsReducedConstraint) {
  Rng rng(6);
  auto spec = free_lti_spec(2, 1, 8, rng);
  spec.supports = SupportSpec::from_banned(8, {{1, 3}});
  const auto r = validate(spec);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.spec->constraint().row_count(), 4);
  EXPECT_TRUE(r.spec->constraint().full_row_rank());
}

TEST(Validate, UnvalidatedSpecRefusesConstraintAccess) {
  Rng rng(7);
  const auto spec = free_lti_spec(1, 1, 2, rng);
  try {
    spec.constraint();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kContract);
  }
}

TEST(Validate, Idempotent) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const int N = rng.integer(1, 10);
    const int m = rng.integer(1, 3);
    auto spec = free_lti_spec(rng.integer(1, 4), m, N, rng);
    spec.supports = SupportSpec::from_banned(N, rng.banned_sets(N, m, 0.3));
    const auto once = validate(spec);
    ASSERT_TRUE(once.ok());
    const auto twice = validate(*once.spec);
    ASSERT_TRUE(twice.ok());
    EXPECT_EQ(twice.spec->constraint().stacked(), once.spec->constraint().stacked());
    EXPECT_EQ(twice.spec->constraint().rows(), once.spec->constraint().rows());
    EXPECT_EQ(twice.spec->supports, once.spec->supports);
  }
}

TEST(Dynamics, GeneralWrappingAgrees) {
  Rng rng(9);
  const auto affine = builtin::affine_toy();
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.integer(1, 5);
    const int m = rng.integer(1, 3);
    const DynamicsModel lti(LtiDynamics{rng.matrix(n, n), rng.matrix(n, m)});
    const DynamicsModel general = lti.as_general();
    ASSERT_EQ(general.kind(), DynamicsModel::Kind::kGeneral);
    const int t = rng.integer(0, 20);
    const Vector x = rng.vector(n, 5.0);
    const Vector u = rng.vector(m, 5.0);
    EXPECT_LE(max_abs(Vector(lti(t, x, u) - general(t, x, u))), 1e-12);
    EXPECT_LE(max_abs(Matrix(lti.jacobian_x(t, x, u) - general.jacobian_x(t, x, u))), 1e-12);
    EXPECT_LE(max_abs(Matrix(lti.jacobian_u(t, x, u) - general.jacobian_u(t, x, u))), 1e-12);
    const Vector direct = lti.lti()->A * x + lti.lti()->B * u;
    EXPECT_LE(max_abs(Vector(lti(t, x, u) - direct)), 1e-12);

    const DynamicsModel ca(affine);
    const DynamicsModel cag = ca.as_general();
    const Vector x1 = rng.vector(1, 3.0);
    const Vector u1 = rng.vector(1, 3.0);
    EXPECT_LE(max_abs(Vector(ca(t, x1, u1) - cag(t, x1, u1))), 1e-12);
    EXPECT_NEAR(ca(t, x1, u1)(0), x1(0) + (1 + 0.1 * x1(0)) * u1(0), 1e-12);
  }
}

TEST(CheckJacobians, LtiExact) {
  Rng rng(10);
  const DynamicsModel dyn(LtiDynamics{rng.matrix(3, 3), rng.matrix(3, 2)});
  const CostModel cost(QuadraticCost{rng.psd(3, 3), rng.pd(2)});
  std::vector<JacobianSample> samples;
  for (int k = 0; k < 10; ++k) samples.push_back({k, rng.vector(3), rng.vector(2)});
  const auto report = check_jacobians(dyn, cost, samples);
  EXPECT_LE(report.dynamics_x, 1e-9);
  EXPECT_LE(report.dynamics_u, 1e-9);
  EXPECT_LE(report.cost_x, 1e-6);
  EXPECT_LE(report.cost_u, 1e-6);
}

TEST(CheckJacobians, ControlAffineToy) {
  Rng rng(11);
  std::vector<JacobianSample> samples;
  for (int k = 0; k < 10; ++k) samples.push_back({k, rng.vector(1, 2.0), rng.vector(1, 2.0)});
  const auto report = check_jacobians(
      builtin::affine_toy(), QuadraticCost{Matrix::Identity(1, 1), Matrix::Identity(1, 1)},
      samples);
  EXPECT_LE(report.max(), 1e-8);
}

TEST(CheckJacobians, CorruptedEntryIsReported) {
  Rng rng(12);
  const LtiDynamics lti{rng.matrix(2, 2), rng.matrix(2, 1)};
  GeneralDynamics g;
  g.state_dim = 2;
  g.control_dim = 1;
  g.map = [lti](int, const Vector& x, const Vector& u) -> Vector { return lti.A * x + lti.B * u; };
  g.jacobian_x = [lti](int, const Vector&, const Vector&) {
    Matrix j = lti.A;
    j(1, 0) += 0.1;
    return j;
  };
  g.jacobian_u = [lti](int, const Vector&, const Vector&) { return lti.B; };
  const auto report = check_jacobians(g, QuadraticCost{Matrix::Identity(2, 2), Matrix::Identity(1, 1)},
                                      {{0, rng.vector(2), rng.vector(1)}});
  EXPECT_NEAR(report.dynamics_x, 0.1, 1e-8);
  EXPECT_LE(report.dynamics_u, 1e-9);
  EXPECT_EQ(report.worst_sample, 0);
}

TEST(CheckJacobians, EvaluatorFailureCarriesSampleTag) {
  GeneralDynamics g;
  g.state_dim = 1;
  g.control_dim = 1;
  g.map = [](int t, const Vector& x, const Vector&) -> Vector {
    if (t == 3) throw std::runtime_error("blew up");
    return x;
  };
  g.jacobian_x = [](int, const Vector&, const Vector&) { return Matrix::Identity(1, 1); };
  g.jacobian_u = [](int, const Vector&, const Vector&) { return Matrix::Zero(1, 1); };
  const Vector z = Vector::Zero(1);
  try {
    check_jacobians(g, QuadraticCost{Matrix::Identity(1, 1), Matrix::Identity(1, 1)},
                    {{0, z, z}, {3, z, z}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEvaluation);
    EXPECT_NE(std::string(e.what()).find("sample 1 (t=3)"), std::string::npos);
  }
}

TEST(Sets, Violation) {
  Vector lo(2), hi(2), x(2);
  lo << -1, -1;
  hi << 1, 1;
  x << 1.5, 0;
  EXPECT_NEAR(StateSet::box(lo, hi).violation(x), 0.5, 1e-15);
  EXPECT_EQ(StateSet::free().violation(x), 0.0);
  EXPECT_NEAR(StateSet::fixed(Vector::Zero(2)).violation(x), 1.5, 1e-15);
  EXPECT_EQ(ControlSet::box(lo, hi).violation(Vector::Zero(2)), 0.0);
}

}  // namespace
}  // namespace pmpfreq
