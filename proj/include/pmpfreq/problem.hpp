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

// The finite-horizon optimal control problem: dynamics, stage costs,
// per-stage state and control sets, and banned control frequencies.
//
// User-supplied evaluators must be pure functions of their arguments; a
// validated ProblemSpec is shared freely and never mutated.

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "pmpfreq/core.hpp"
#include "pmpfreq/spectrum.hpp"

namespace pmpfreq {

using StateMap = std::function<Vector(int t, const Vector& x)>;
using StateMatrixMap = std::function<Matrix(int t, const Vector& x)>;
using StageMap = std::function<Vector(int t, const Vector& x, const Vector& u)>;
using StageMatrixMap =
    std::function<Matrix(int t, const Vector& x, const Vector& u)>;
using StageScalar = std::function<double(int t, const Vector& x, const Vector& u)>;

/// x_{t+1} = A x_t + B u_t.
struct LtiDynamics {
  Matrix A;
  Matrix B;
};

/// x_{t+1} = a_t(x_t) + b_t(x_t) u_t.
struct ControlAffineDynamics {
  int state_dim = 0;
  int control_dim = 0;
  StateMap drift;                 // a_t(x)
  StateMatrixMap drift_jacobian;  // d a_t / d x, n x n
  StateMatrixMap input_matrix;    // b_t(x), n x m
  StageMatrixMap input_jacobian;  // d (b_t(x) u) / d x, n x n
  // Catalog entry this model came from; empty for user-supplied models.
  std::string name;
  std::map<std::string, double> parameters;
};

/// x_{t+1} = f_t(x_t, u_t) with user Jacobians.
struct GeneralDynamics {
  int state_dim = 0;
  int control_dim = 0;
  StageMap map;
  StageMatrixMap jacobian_x;  // n x n
  StageMatrixMap jacobian_u;  // n x m
};

class DynamicsModel {
 public:
  enum class Kind { kGeneral, kControlAffine, kLti };

  DynamicsModel() = default;
  DynamicsModel(LtiDynamics d) : model_(std::move(d)) {}
  DynamicsModel(ControlAffineDynamics d) : model_(std::move(d)) {}
  DynamicsModel(GeneralDynamics d) : model_(std::move(d)) {}

  Kind kind() const {
    if (std::holds_alternative<LtiDynamics>(model_)) return Kind::kLti;
    if (std::holds_alternative<ControlAffineDynamics>(model_))
      return Kind::kControlAffine;
    return Kind::kGeneral;
  }

  int state_dim() const {
    return std::visit(
        [](const auto& d) -> int {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, LtiDynamics>)
            return static_cast<int>(d.A.rows());
          else
            return d.state_dim;
        },
        model_);
  }

  int control_dim() const {
    return std::visit(
        [](const auto& d) -> int {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, LtiDynamics>)
            return static_cast<int>(d.B.cols());
          else
            return d.control_dim;
        },
        model_);
  }

  Vector operator()(int t, const Vector& x, const Vector& u) const {
    return std::visit(
        [&](const auto& d) -> Vector {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, LtiDynamics>)
            return d.A * x + d.B * u;
          else if constexpr (std::is_same_v<T, ControlAffineDynamics>)
            return d.drift(t, x) + d.input_matrix(t, x) * u;
          else
            return d.map(t, x, u);
        },
        model_);
  }

  Matrix jacobian_x(int t, const Vector& x, const Vector& u) const {
    return std::visit(
        [&](const auto& d) -> Matrix {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, LtiDynamics>)
            return d.A;
          else if constexpr (std::is_same_v<T, ControlAffineDynamics>)
            return d.drift_jacobian(t, x) + d.input_jacobian(t, x, u);
          else
            return d.jacobian_x(t, x, u);
        },
        model_);
  }

  Matrix jacobian_u(int t, const Vector& x, const Vector& u) const {
    return std::visit(
        [&](const auto& d) -> Matrix {
          using T = std::decay_t<decltype(d)>;
          if constexpr (std::is_same_v<T, LtiDynamics>)
            return d.B;
          else if constexpr (std::is_same_v<T, ControlAffineDynamics>)
            return d.input_matrix(t, x);
          else
            return d.jacobian_u(t, x, u);
        },
        model_);
  }

  /// The same map behind the GENERAL interface.
  DynamicsModel as_general() const {
    auto self = *this;
    GeneralDynamics g;
    g.state_dim = state_dim();
    g.control_dim = control_dim();
    g.map = [self](int t, const Vector& x, const Vector& u) { return self(t, x, u); };
    g.jacobian_x = [self](int t, const Vector& x, const Vector& u) {
      return self.jacobian_x(t, x, u);
    };
    g.jacobian_u = [self](int t, const Vector& x, const Vector& u) {
      return self.jacobian_u(t, x, u);
    };
    return DynamicsModel(std::move(g));
  }

  const LtiDynamics* lti() const { return std::get_if<LtiDynamics>(&model_); }
  const ControlAffineDynamics* control_affine() const {
    return std::get_if<ControlAffineDynamics>(&model_);
  }
  const GeneralDynamics* general() const {
    return std::get_if<GeneralDynamics>(&model_);
  }

 private:
  std::variant<GeneralDynamics, ControlAffineDynamics, LtiDynamics> model_;
};

inline const char* to_string(DynamicsModel::Kind kind) {
  switch (kind) {
    case DynamicsModel::Kind::kGeneral: return "GENERAL";
    case DynamicsModel::Kind::kControlAffine: return "CONTROL_AFFINE";
    case DynamicsModel::Kind::kLti: return "LTI";
  }
  return "?";
}

/// c_t(x, u) = 1/2 x'Qx + 1/2 u'Ru.
struct QuadraticCost {
  Matrix Q;
  Matrix R;
};

struct GeneralCost {
  int state_dim = 0;
  int control_dim = 0;
  StageScalar value;
  StageMap gradient_x;
  StageMap gradient_u;
};

class CostModel {
 public:
  enum class Kind { kGeneral, kQuadratic };

  CostModel() = default;
  CostModel(QuadraticCost c) : model_(std::move(c)) {}
  CostModel(GeneralCost c) : model_(std::move(c)) {}

  Kind kind() const {
    return std::holds_alternative<QuadraticCost>(model_) ? Kind::kQuadratic
                                                         : Kind::kGeneral;
  }

  double operator()(int t, const Vector& x, const Vector& u) const {
    if (const auto* q = quadratic())
      return 0.5 * x.dot(q->Q * x) + 0.5 * u.dot(q->R * u);
    return std::get<GeneralCost>(model_).value(t, x, u);
  }

  Vector gradient_x(int t, const Vector& x, const Vector& u) const {
    if (const auto* q = quadratic()) return 0.5 * (q->Q + q->Q.transpose()) * x;
    return std::get<GeneralCost>(model_).gradient_x(t, x, u);
  }

  Vector gradient_u(int t, const Vector& x, const Vector& u) const {
    if (const auto* q = quadratic()) return 0.5 * (q->R + q->R.transpose()) * u;
    return std::get<GeneralCost>(model_).gradient_u(t, x, u);
  }

  CostModel as_general() const {
    auto self = *this;
    GeneralCost g;
    if (const auto* q = quadratic()) {
      g.state_dim = static_cast<int>(q->Q.rows());
      g.control_dim = static_cast<int>(q->R.rows());
    } else {
      g = std::get<GeneralCost>(model_);
    }
    g.value = [self](int t, const Vector& x, const Vector& u) { return self(t, x, u); };
    g.gradient_x = [self](int t, const Vector& x, const Vector& u) {
      return self.gradient_x(t, x, u);
    };
    g.gradient_u = [self](int t, const Vector& x, const Vector& u) {
      return self.gradient_u(t, x, u);
    };
    return CostModel(std::move(g));
  }

  const QuadraticCost* quadratic() const { return std::get_if<QuadraticCost>(&model_); }
  const GeneralCost* general() const { return std::get_if<GeneralCost>(&model_); }

 private:
  std::variant<GeneralCost, QuadraticCost> model_;
};

struct StateSet {
  enum class Kind { kFree, kFixed, kBox };
  Kind kind = Kind::kFree;
  Vector point;  // kFixed
  Vector lower;  // kBox
  Vector upper;  // kBox

  static StateSet free() { return {}; }
  static StateSet fixed(Vector p) { return {Kind::kFixed, std::move(p), {}, {}}; }
  static StateSet box(Vector lo, Vector hi) {
    return {Kind::kBox, {}, std::move(lo), std::move(hi)};
  }

  /// Max-norm distance of x outside the set (0 when inside).
  double violation(const Vector& x) const {
    switch (kind) {
      case Kind::kFree: return 0.0;
      case Kind::kFixed: return max_abs(Vector(x - point));
      case Kind::kBox: {
        double v = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i)
          v = std::max({v, lower(i) - x(i), x(i) - upper(i)});
        return v;
      }
    }
    return 0.0;
  }
};

struct ControlSet {
  enum class Kind { kFree, kBox };
  Kind kind = Kind::kFree;
  Vector lower;
  Vector upper;

  static ControlSet free() { return {}; }
  static ControlSet box(Vector lo, Vector hi) {
    return {Kind::kBox, std::move(lo), std::move(hi)};
  }

  double violation(const Vector& u) const {
    if (kind == Kind::kFree) return 0.0;
    double v = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i)
      v = std::max({v, lower(i) - u(i), u(i) - upper(i)});
    return v;
  }
};

namespace detail {
inline bool same(const Vector& a, const Vector& b) { return a.size() == b.size() && a == b; }
}  // namespace detail

inline bool operator==(const StateSet& a, const StateSet& b) {
  return a.kind == b.kind && detail::same(a.point, b.point) && detail::same(a.lower, b.lower) &&
         detail::same(a.upper, b.upper);
}

inline bool operator==(const ControlSet& a, const ControlSet& b) {
  return a.kind == b.kind && detail::same(a.lower, b.lower) && detail::same(a.upper, b.upper);
}

struct ProblemSpec {
  int horizon = 0;
  DynamicsModel dynamics;
  CostModel cost;
  std::vector<StateSet> state_sets;      // N + 1 entries
  std::vector<ControlSet> control_sets;  // N entries
  SupportSpec supports;
  // Set by validate(): the row-reduced frequency constraint map.
  std::optional<FrequencyConstraint> frequency_constraint;

  int state_dim() const { return dynamics.state_dim(); }
  int control_dim() const { return dynamics.control_dim(); }
  bool validated() const { return frequency_constraint.has_value(); }

  const FrequencyConstraint& constraint() const {
    if (!frequency_constraint) {
      throw Error(ErrorCode::kContract, "problem spec has not been validated");
    }
    return *frequency_constraint;
  }
};

struct ValidationIssue {
  int stage = -1;  // -1 when the issue is not tied to a stage
  std::string field;
  std::string message;

  std::string to_string() const {
    std::ostringstream os;
    if (stage >= 0) os << "stage " << stage << ", ";
    os << field << ": " << message;
    return os.str();
  }
};

struct ValidationResult {
  std::optional<ProblemSpec> spec;
  std::vector<ValidationIssue> issues;

  bool ok() const { return spec.has_value(); }
};

inline constexpr double kSymmetryTolerance = 1e-10;
inline constexpr double kPsdTolerance = 1e-10;

namespace detail {

inline void check_box(const Vector& lower, const Vector& upper, int dim, int stage,
                      const std::string& field,
                      std::vector<ValidationIssue>& issues) {
  if (lower.size() != dim || upper.size() != dim) {
    issues.push_back({stage, field,
                      "box bounds must have dimension " + std::to_string(dim)});
    return;
  }
  for (int i = 0; i < dim; ++i) {
    if (!(lower(i) <= upper(i))) {
      std::ostringstream os;
      os << "lower > upper at coordinate " << i << " (" << lower(i) << " > "
         << upper(i) << ")";
      issues.push_back({stage, field, os.str()});
    }
  }
}

}  // namespace detail

/// Checks every dimension, definiteness and bound condition and, when all
/// hold, returns the spec with its frequency constraint built. Validating an
/// already validated spec rebuilds the same constraint.
inline ValidationResult validate(const ProblemSpec& spec) {
  std::vector<ValidationIssue> issues;
  const int N = spec.horizon;
  if (N < 1) issues.push_back({-1, "horizon", "must be at least 1"});

  const int n = spec.state_dim();
  const int m = spec.control_dim();
  if (n < 1) issues.push_back({-1, "dynamics", "state dimension must be positive"});
  if (m < 1) issues.push_back({-1, "dynamics", "control dimension must be positive"});

  if (const auto* lti = spec.dynamics.lti()) {
    if (lti->A.rows() != lti->A.cols())
      issues.push_back({-1, "dynamics.A", "must be square"});
    if (lti->B.rows() != lti->A.rows())
      issues.push_back({-1, "dynamics.B", "row count must equal state dimension"});
  } else if (const auto* ca = spec.dynamics.control_affine()) {
    if (!ca->drift || !ca->drift_jacobian || !ca->input_matrix || !ca->input_jacobian)
      issues.push_back({-1, "dynamics", "control-affine evaluators missing"});
  } else if (const auto* g = spec.dynamics.general()) {
    if (!g->map || !g->jacobian_x || !g->jacobian_u)
      issues.push_back({-1, "dynamics", "general evaluators missing"});
  }

  if (const auto* q = spec.cost.quadratic()) {
    if (q->Q.rows() != n || q->Q.cols() != n) {
      issues.push_back({-1, "cost.Q", "must be " + std::to_string(n) + "x" +
                                          std::to_string(n)});
    } else {
      if (!is_symmetric(q->Q, kSymmetryTolerance))
        issues.push_back({-1, "cost.Q", "Q not symmetric"});
      else if (min_eigenvalue(q->Q) < -kPsdTolerance)
        issues.push_back({-1, "cost.Q", "Q not positive semidefinite"});
    }
    if (q->R.rows() != m || q->R.cols() != m) {
      issues.push_back({-1, "cost.R", "must be " + std::to_string(m) + "x" +
                                          std::to_string(m)});
    } else {
      if (!is_symmetric(q->R, kSymmetryTolerance))
        issues.push_back({-1, "cost.R", "R not symmetric"});
      else if (!(min_eigenvalue(q->R) > 0.0))
        issues.push_back({-1, "cost.R", "R not positive definite"});
    }
  } else if (const auto* g = spec.cost.general()) {
    if (!g->value || !g->gradient_x || !g->gradient_u)
      issues.push_back({-1, "cost", "general cost evaluators missing"});
    if (g->state_dim != n || g->control_dim != m)
      issues.push_back({-1, "cost", "dimensions do not match dynamics"});
  }

  if (N >= 1 && static_cast<int>(spec.state_sets.size()) != N + 1) {
    issues.push_back({-1, "state_sets",
                      "expected " + std::to_string(N + 1) + " entries, got " +
                          std::to_string(spec.state_sets.size())});
  }
  for (std::size_t t = 0; t < spec.state_sets.size(); ++t) {
    const auto& s = spec.state_sets[t];
    const int stage = static_cast<int>(t);
    if (s.kind == StateSet::Kind::kFixed && s.point.size() != n)
      issues.push_back({stage, "state_sets",
                        "fixed point must have dimension " + std::to_string(n)});
    if (s.kind == StateSet::Kind::kBox)
      detail::check_box(s.lower, s.upper, n, stage, "state_sets", issues);
  }

  if (N >= 1 && static_cast<int>(spec.control_sets.size()) != N) {
    issues.push_back({-1, "control_sets",
                      "expected " + std::to_string(N) + " entries, got " +
                          std::to_string(spec.control_sets.size())});
  }
  for (std::size_t t = 0; t < spec.control_sets.size(); ++t) {
    const auto& c = spec.control_sets[t];
    if (c.kind == ControlSet::Kind::kBox)
      detail::check_box(c.lower, c.upper, m, static_cast<int>(t), "control_sets",
                        issues);
  }

  if (spec.supports.channels() != m)
    issues.push_back({-1, "banned_frequencies",
                      "expected " + std::to_string(m) + " channels, got " +
                          std::to_string(spec.supports.channels())});
  if (spec.supports.horizon() != N)
    issues.push_back({-1, "banned_frequencies",
                      "support horizon " + std::to_string(spec.supports.horizon()) +
                          " does not match horizon " + std::to_string(N)});

  ValidationResult result;
  result.issues = std::move(issues);
  if (!result.issues.empty()) return result;

  ProblemSpec out = spec;
  out.frequency_constraint =
      build_frequency_constraint(spec.supports, N, m).reduced();
  result.spec = std::move(out);
  return result;
}

/// Central-difference Jacobian with per-coordinate step 1e-6 (1 + |z_i|).
template <typename Fn>
Matrix finite_difference_jacobian(Fn&& fn, const Vector& at) {
  const Vector f0 = fn(at);
  Matrix jac(f0.size(), at.size());
  Vector z = at;
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(at(i)));
    z(i) = at(i) + h;
    const double up = z(i);
    const Vector fp = fn(z);
    z(i) = at(i) - h;
    const double down = z(i);
    const Vector fm = fn(z);
    z(i) = at(i);
    jac.col(i) = (fp - fm) / (up - down);
  }
  return jac;
}

struct JacobianSample {
  int t = 0;
  Vector x;
  Vector u;
};

/// Largest |supplied - finite difference| per derivative block.
struct JacobianReport {
  double dynamics_x = 0.0;
  double dynamics_u = 0.0;
  double cost_x = 0.0;
  double cost_u = 0.0;
  int worst_sample = -1;

  double max() const { return std::max({dynamics_x, dynamics_u, cost_x, cost_u}); }
};

inline JacobianReport check_jacobians(const DynamicsModel& dynamics,
                                      const CostModel& cost,
                                      const std::vector<JacobianSample>& samples) {
  JacobianReport report;
  double worst = -1.0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    try {
      const Matrix fx = finite_difference_jacobian(
          [&](const Vector& x) { return dynamics(s.t, x, s.u); }, s.x);
      const Matrix fu = finite_difference_jacobian(
          [&](const Vector& u) { return dynamics(s.t, s.x, u); }, s.u);
      const auto scalar_cost = [&](const Vector& x, const Vector& u) {
        Vector v(1);
        v(0) = cost(s.t, x, u);
        return v;
      };
      const Matrix cx = finite_difference_jacobian(
          [&](const Vector& x) { return scalar_cost(x, s.u); }, s.x);
      const Matrix cu = finite_difference_jacobian(
          [&](const Vector& u) { return scalar_cost(s.x, u); }, s.u);

      const double dx = max_abs(Matrix(dynamics.jacobian_x(s.t, s.x, s.u) - fx));
      const double du = max_abs(Matrix(dynamics.jacobian_u(s.t, s.x, s.u) - fu));
      const double gx =
          max_abs(Vector(cost.gradient_x(s.t, s.x, s.u) - cx.row(0).transpose()));
      const double gu =
          max_abs(Vector(cost.gradient_u(s.t, s.x, s.u) - cu.row(0).transpose()));
      report.dynamics_x = std::max(report.dynamics_x, dx);
      report.dynamics_u = std::max(report.dynamics_u, du);
      report.cost_x = std::max(report.cost_x, gx);
      report.cost_u = std::max(report.cost_u, gu);
      const double here = std::max({dx, du, gx, gu});
      if (here > worst) {
        worst = here;
        report.worst_sample = static_cast<int>(k);
      }
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kEvaluation, "sample " + std::to_string(k) +
                                              " (t=" + std::to_string(s.t) +
                                              "): " + e.what());
    }
  }
  return report;
}

/// Free interior stages, x_0 fixed, x_N fixed (or free when xf is empty),
/// free controls, no banned frequencies.
inline ProblemSpec make_transfer_spec(int horizon, DynamicsModel dynamics,
                                      CostModel cost, const Vector& x0,
                                      const std::optional<Vector>& xf) {
  ProblemSpec spec;
  spec.horizon = horizon;
  const int m = dynamics.control_dim();
  spec.dynamics = std::move(dynamics);
  spec.cost = std::move(cost);
  spec.state_sets.assign(static_cast<std::size_t>(std::max(horizon, 0) + 1),
                         StateSet::free());
  spec.state_sets.front() = StateSet::fixed(x0);
  if (xf) spec.state_sets.back() = StateSet::fixed(*xf);
  spec.control_sets.assign(static_cast<std::size_t>(std::max(horizon, 0)),
                           ControlSet::free());
  spec.supports = SupportSpec::unconstrained(std::max(horizon, 1), m);
  return spec;
}

}  // namespace pmpfreq
