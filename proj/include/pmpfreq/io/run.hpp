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

// Batch driver behind the command line tool: read a problem file, solve,
// certify, write a result file.
//
// Exit codes: 0 solved and certified, 1 bad input (no result written),
// 2 infeasible transfer, 3 abnormal regime, 4 no convergence or singular
// system, 5 solved but the certificate failed.

#pragma once

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "pmpfreq/extremal.hpp"
#include "pmpfreq/io/digest.hpp"
#include "pmpfreq/io/overrides.hpp"
#include "pmpfreq/io/problem_file.hpp"
#include "pmpfreq/io/result_file.hpp"
#include "pmpfreq/lq.hpp"
#include "pmpfreq/shooting.hpp"
#include "pmpfreq/version.hpp"

namespace pmpfreq::io {

enum ExitCode : int {
  kExitSolved = 0,
  kExitSpecError = 1,
  kExitInfeasible = 2,
  kExitAbnormal = 3,
  kExitNoConvergence = 4,
  kExitCertificateFailed = 5,
};

inline constexpr double kLqCertificateTolerance = 1e-7;
inline constexpr double kShootingCertificateTolerance = 1e-6;

struct Outcome {
  std::string status;
  int exit_code = kExitSolved;
  std::optional<Trajectory> trajectory;
  std::optional<ExtremalLift> lift;
  double cost = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();
  std::optional<PmpCertificate> certificate;
  std::optional<ShootingResult> shooting;
  std::vector<std::string> messages;
};

/// Reasons the chosen solver cannot take this problem.
inline std::vector<FileIssue> solver_fit_issues(const ProblemFile& pf, const ProblemSpec& spec) {
  std::vector<FileIssue> issues;
  const std::string name = to_string(pf.solver);
  const bool lti = pf.dynamics.kind == DynamicsModel::Kind::kLti;
  if (pf.solver != SolverKind::kShooting && !lti)
    issues.push_back({"/dynamics/kind", 0, name + " needs LTI dynamics"});
  const int N = spec.horizon;
  for (int t = 0; t < N; ++t)
    if (pf.control_sets[t].kind != ControlSet::Kind::kFree)
      issues.push_back({"/control_sets/" + std::to_string(t), 0,
                        name + " supports FREE control sets only"});
  for (int t = 1; t < N; ++t)
    if (pf.state_sets[t].kind != StateSet::Kind::kFree)
      issues.push_back({"/state_sets/" + std::to_string(t), 0,
                        name + " supports FREE interior state sets only"});
  const bool free_end = pf.state_sets[N].kind == StateSet::Kind::kFree;
  const bool fixed_end = pf.state_sets[N].kind == StateSet::Kind::kFixed;
  switch (pf.solver) {
    case SolverKind::kRiccati:
    case SolverKind::kLqPmp:
      if (!free_end) issues.push_back({"/boundary/xf", 0, name + " needs \"xf\": \"free\""});
      break;
    default:
      if (!fixed_end) issues.push_back({"/boundary/xf", 0, name + " needs a fixed \"xf\""});
  }
  const bool banned = !spec.supports.empty();
  if (banned && (pf.solver == SolverKind::kRiccati || pf.solver == SolverKind::kLqPmp ||
                 pf.solver == SolverKind::kTransfer))
    issues.push_back({"/banned_frequencies", 0,
                      name + " ignores frequency constraints; use transfer_freq or shooting"});
  return issues;
}

namespace detail {

inline Outcome from_lq(LqSolution sol, ExtremalLift lift) {
  Outcome o;
  o.status = to_string(sol.status);
  o.residual = sol.residual;
  switch (sol.status) {
    case SolveStatus::kSolved: o.exit_code = kExitSolved; break;
    case SolveStatus::kInfeasible:
      o.exit_code = kExitInfeasible;
      o.messages.push_back("target unreachable: least-squares residual " +
                           std::to_string(sol.residual));
      break;
    case SolveStatus::kAbnormalRegime:
      o.exit_code = kExitAbnormal;
      o.messages.push_back("every extremal is abnormal (q + n > m N); refusing to solve");
      return o;
    case SolveStatus::kSingular: o.exit_code = kExitNoConvergence; return o;
  }
  o.cost = sol.cost;
  o.trajectory = std::move(sol.trajectory);
  o.lift = std::move(lift);
  return o;
}

}  // namespace detail

inline Outcome solve_problem(const ProblemFile& pf, const ProblemSpec& spec) {
  const int N = spec.horizon;
  const Vector x0 = spec.state_sets.front().point;
  if (pf.solver == SolverKind::kShooting) {
    NewtonOptions opts;
    opts.max_iterations = pf.options.max_iterations;
    opts.tolerance = pf.options.newton_tolerance;
    opts.finite_difference_jacobian = pf.options.finite_difference_jacobian;
    opts.certificate_tolerance = pf.options.tolerance.value_or(kShootingCertificateTolerance);
    const Vector xf = spec.state_sets.back().point;
    Outcome o;
    if (const auto* lti = spec.dynamics.lti(); lti && spec.constraint().row_count() > 0) {
      const auto v = classify_normality_freq(lti->A, lti->B, N, spec.constraint());
      if (v.classification == NormalityVerdict::Classification::kAllAbnormal) {
        o.status = to_string(SolveStatus::kAbnormalRegime);
        o.exit_code = kExitAbnormal;
        o.messages.push_back("every extremal is abnormal (q + n > m N); refusing to solve");
        return o;
      }
    }
    try {
      auto res = newton_solve(spec, x0, xf, std::nullopt, opts);
      o.residual = res.final_residual;
      o.cost = res.cost;
      o.trajectory = res.trajectory;
      o.lift = res.lift;
      if (res.init_fallback) o.messages.push_back("linearized initialization failed; started from zero");
      if (res.converged) {
        o.status = "SOLVED";
        o.exit_code = kExitSolved;
      } else {
        o.status = "NOT_CONVERGED";
        o.exit_code = kExitNoConvergence;
        o.messages.push_back("Newton stopped after " + std::to_string(res.iterations) +
                             " iterations with residual " + std::to_string(res.final_residual));
      }
      o.shooting = std::move(res);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularJacobian) throw;
      o.status = "SINGULAR_JACOBIAN";
      o.exit_code = kExitNoConvergence;
      o.messages.push_back(e.what());
    }
    return o;
  }

  const auto& lti = *spec.dynamics.lti();
  const Matrix& Q = pf.cost.Q;
  const Matrix& R = pf.cost.R;
  switch (pf.solver) {
    case SolverKind::kRiccati: {
      const auto r = riccati_solve(lti.A, lti.B, Q, R, N, x0);
      Outcome o;
      o.status = to_string(r.status);
      if (r.status != SolveStatus::kSolved) {
        o.exit_code = kExitNoConvergence;
        return o;
      }
      o.cost = r.solution.cost;
      o.residual = 0.0;
      o.trajectory = r.trajectory;
      o.lift = riccati_lift(lti.A, Q, r);
      return o;
    }
    case SolverKind::kLqPmp: {
      auto sol = lq_pmp_solve(lti.A, lti.B, Q, R, N, x0);
      if (sol.status != SolveStatus::kSolved) return detail::from_lq(std::move(sol), {});
      auto lift = free_endpoint_lift(lti.A, Q, sol);
      return detail::from_lq(std::move(sol), std::move(lift));
    }
    case SolverKind::kTransfer:
    case SolverKind::kTransferFreq: {
      const Vector xf = spec.state_sets.back().point;
      auto sol = pf.solver == SolverKind::kTransfer
                     ? lq_transfer_solve(lti.A, lti.B, Q, R, N, x0, xf)
                     : lq_transfer_freq_solve(lti.A, lti.B, Q, R, N, x0, xf, spec.constraint());
      if (sol.status == SolveStatus::kAbnormalRegime || sol.status == SolveStatus::kSingular)
        return detail::from_lq(std::move(sol), {});
      auto lift = transfer_lift(lti.A, Q, sol);
      return detail::from_lq(std::move(sol), std::move(lift));
    }
    default: break;
  }
  throw Error(ErrorCode::kContract, "unhandled solver");
}

inline Json normality_for(const ProblemSpec& spec) {
  const int N = spec.horizon;
  Json j;
  Matrix A;
  Matrix B;
  if (const auto* lti = spec.dynamics.lti()) {
    A = lti->A;
    B = lti->B;
    j["linearized"] = false;
  } else {
    const Vector x0 = spec.state_sets.front().point;
    const Vector u0 = Vector::Zero(spec.control_dim());
    A = spec.dynamics.jacobian_x(0, x0, u0);
    B = spec.dynamics.jacobian_u(0, x0, u0);
    j["linearized"] = true;
  }
  j["classic"] = normality_json(classify_normality_classic(A, B, N));
  j["frequency"] = normality_json(classify_normality_freq(A, B, N, spec.constraint()));
  return j;
}

inline Json result_json(const ProblemFile& pf, const ProblemSpec& spec, const Outcome& o,
                        const std::string& digest) {
  Json r;
  r["tool"] = {{"name", "pmpfreq"}, {"version", kVersion}};
  r["input_digest"] = "sha256:" + digest;
  r["solver"] = to_string(pf.solver);
  r["status"] = o.status;
  r["dimensions"] = {{"horizon", spec.horizon},
                     {"state_dim", spec.state_dim()},
                     {"control_dim", spec.control_dim()},
                     {"constraint_rows", spec.constraint().row_count()}};
  r["cost"] = o.cost;
  r["banned_frequencies"] = spec.constraint().canonical_supports().banned_sets();
  if (o.trajectory) {
    r["states"] = sequence_json(o.trajectory->states);
    r["controls"] = sequence_json(o.trajectory->controls);
    r["spectra"] = spectra_json(o.trajectory->controls, spec.constraint().canonical_supports());
  } else {
    r["states"] = nullptr;
    r["controls"] = nullptr;
    r["spectra"] = nullptr;
  }
  r["multipliers"] = o.lift ? lift_json(*o.lift) : Json(nullptr);
  r["certificate"] = o.certificate ? certificate_json(*o.certificate) : Json(nullptr);
  r["normality"] = normality_for(spec);

  Json d;
  d["residual"] = o.residual;
  d["messages"] = o.messages;
  d["uncertainty"] = o.trajectory ? uncertainty_json(uncertainty_check(
                                        o.trajectory->controls, pf.options.support_tolerance))
                                  : Json(nullptr);
  if (o.shooting) {
    d["iterations"] = o.shooting->iterations;
    d["initial_residual"] = o.shooting->initial_residual;
    d["init_fallback"] = o.shooting->init_fallback;
    d["trace"] = trace_json(o.shooting->trace);
  }
  r["diagnostics"] = d;
  return r;
}

struct RunOptions {
  std::vector<std::string> overrides;
  std::optional<std::string> solver;
  std::optional<double> tolerance;
  bool quiet = false;
};

/// Reads `input_path`, solves, writes the result to `output_path` ("-" or
/// empty for standard output) and returns the exit code.
inline int run(const std::string& input_path, const std::string& output_path,
               const RunOptions& opts, std::ostream& out, std::ostream& err) {
  ProblemFile pf;
  ProblemSpec spec;
  std::string digest;
  try {
    const std::string text = read_text_file(input_path);
    Json doc = parse_json_text(text);
    apply_overrides(doc, opts.overrides);
    if (opts.solver) doc["solver"] = *opts.solver;
    if (opts.tolerance) doc["options"]["tolerance"] = *opts.tolerance;
    digest = sha256_hex(doc.dump());
    pf = problem_from_json(doc);
    spec = load_spec(pf);
    const auto fit = solver_fit_issues(pf, spec);
    if (!fit.empty()) throw ProblemFileError(fit);
  } catch (const ProblemFileError& e) {
    for (const auto& i : e.issues()) err << input_path << ": " << i.to_string() << '\n';
    return kExitSpecError;
  } catch (const Error& e) {
    err << input_path << ": " << e.what() << '\n';
    return kExitSpecError;
  }

  Outcome outcome;
  try {
    outcome = solve_problem(pf, spec);
  } catch (const Error& e) {
    err << input_path << ": " << to_string(e.code()) << ": " << e.what() << '\n';
    return kExitSpecError;
  }
  if (outcome.exit_code == kExitSolved && outcome.trajectory && outcome.lift) {
    const double tol = pf.options.tolerance.value_or(pf.solver == SolverKind::kShooting
                                                         ? kShootingCertificateTolerance
                                                         : kLqCertificateTolerance);
    outcome.certificate = verify_pmp(*outcome.trajectory, *outcome.lift, spec, tol);
    if (!outcome.certificate->pass) {
      outcome.exit_code = kExitCertificateFailed;
      std::string failed;
      for (const auto& f : outcome.certificate->failures()) failed += " " + f;
      outcome.messages.push_back("certificate failed:" + failed);
    }
  }

  const Json result = result_json(pf, spec, outcome, digest);
  const std::string text = result.dump(2) + "\n";
  if (output_path.empty() || output_path == "-") {
    out << text;
  } else {
    std::ofstream f(output_path, std::ios::binary);
    if (!f) {
      err << "cannot write " << output_path << '\n';
      return kExitSpecError;
    }
    f << text;
  }
  for (const auto& m : outcome.messages) err << input_path << ": " << m << '\n';
  if (!opts.quiet && !(output_path.empty() || output_path == "-")) {
    out << to_string(pf.solver) << ": " << outcome.status;
    if (std::isfinite(outcome.cost)) out << ", cost " << outcome.cost;
    if (outcome.certificate) out << ", certificate " << (outcome.certificate->pass ? "pass" : "FAIL");
    out << '\n';
  }
  return outcome.exit_code;
}

inline int run(const std::string& input_path, const std::string& output_path,
               const std::vector<std::string>& overrides) {
  RunOptions opts;
  opts.overrides = overrides;
  return run(input_path, output_path, opts, std::cout, std::cerr);
}

}  // namespace pmpfreq::io
