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

// Shared vocabulary: error type, dense aliases, trajectories and a few
// linear-algebra helpers used by every module.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace pmpfreq {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class ErrorCode {
  kInvalidHorizon,
  kInvalidInput,
  kSpec,
  kShape,
  kContract,
  kEvaluation,
  kSingularJacobian,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidHorizon: return "invalid-horizon";
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kSpec: return "spec";
    case ErrorCode::kShape: return "shape";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kEvaluation: return "evaluation";
    case ErrorCode::kSingularJacobian: return "singular-jacobian";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// State sequence x_0..x_N paired with control sequence u_0..u_{N-1}.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Vector> controls;

  int horizon() const { return static_cast<int>(controls.size()); }
};

inline double max_abs(const Vector& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline double max_abs(const Matrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline double max_abs(const std::vector<Vector>& seq) {
  double r = 0.0;
  for (const auto& v : seq) r = std::max(r, max_abs(v));
  return r;
}

/// Stacks u_0..u_{N-1} into one time-major vector (u_0 first).
inline Vector stack(const std::vector<Vector>& seq) {
  Eigen::Index total = 0;
  for (const auto& v : seq) total += v.size();
  Vector out(total);
  Eigen::Index at = 0;
  for (const auto& v : seq) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  return out;
}

inline std::vector<Vector> unstack(const Vector& flat, int count, int dim) {
  if (flat.size() != static_cast<Eigen::Index>(count) * dim) {
    throw Error(ErrorCode::kShape, "cannot split vector of length " +
                                       std::to_string(flat.size()) + " into " +
                                       std::to_string(count) + " blocks of " +
                                       std::to_string(dim));
  }
  std::vector<Vector> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.emplace_back(flat.segment(i * dim, dim));
  return out;
}

/// Singular values at or below this count as zero:
/// max(max(rows, cols) * sigma_max * 1e-14, 1e-12).
inline double rank_threshold(const Vector& singular_values, Eigen::Index rows,
                             Eigen::Index cols) {
  const double sigma_max =
      singular_values.size() == 0 ? 0.0 : singular_values.maxCoeff();
  const double relative =
      static_cast<double>(std::max(rows, cols)) * sigma_max * 1e-14;
  return std::max(relative, 1e-12);
}

inline int numerical_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  const double thr = rank_threshold(s, m.rows(), m.cols());
  return static_cast<int>((s.array() > thr).count());
}

inline bool is_symmetric(const Matrix& m, double tol) {
  return m.rows() == m.cols() && max_abs(Matrix(m - m.transpose())) <= tol;
}

inline double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric,
                                           Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace pmpfreq
