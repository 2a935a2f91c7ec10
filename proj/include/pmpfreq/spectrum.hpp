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

// DFT machinery and the frequency constraint map.
//
// Conventions:
//   * The DFT is unitary: entry (xi, t) of the DFT matrix is
//     exp(-i 2 pi xi t / N) / sqrt(N). Whether a component vanishes does not
//     depend on the scale, so nothing downstream cares about the factor.
//   * Frequencies are 0-based, xi in {0, ..., N-1}, matching the exponent.
//   * Control trajectories are time-stacked, (u_0, u_1, ..., u_{N-1}), each
//     u_t in R^m. The channel-stacked layout (u^(1), ..., u^(m)), each
//     u^(k) in R^N, is only used while building the constraint.
//
// Banned sets are closed under xi -> N - xi before the constraint is
// assembled. For a real signal the DFT is conjugate symmetric, so banning xi
// bans N - xi anyway; making it explicit keeps the recorded supports honest.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "pmpfreq/core.hpp"

namespace pmpfreq {

using DftMatrix = Eigen::MatrixXcd;
using Spectrum = Eigen::VectorXcd;

namespace detail {

// omega^k with omega = exp(-i 2 pi / N). Reducing k mod N first keeps the
// angle in [0, 2 pi), which is what makes large-N entries accurate.
inline std::complex<double> root_of_unity_power(int n, long long k) {
  const long long r = ((k % n) + n) % n;
  const double angle = -2.0 * std::numbers::pi * static_cast<double>(r) /
                       static_cast<double>(n);
  return {std::cos(angle), std::sin(angle)};
}

}  // namespace detail

inline DftMatrix build_dft_matrix(int horizon) {
  if (horizon < 1) {
    throw Error(ErrorCode::kInvalidHorizon,
                "DFT size must be positive, got " + std::to_string(horizon));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(horizon));
  DftMatrix phi(horizon, horizon);
  for (int xi = 0; xi < horizon; ++xi) {
    for (int t = 0; t < horizon; ++t) {
      phi(xi, t) = scale * detail::root_of_unity_power(
                               horizon, static_cast<long long>(xi) * t);
    }
  }
  return phi;
}

/// Unitary DFT of one real channel; equals build_dft_matrix(N) * signal.
inline Spectrum forward_dft(std::span<const double> signal) {
  if (signal.empty()) {
    throw Error(ErrorCode::kInvalidInput, "forward_dft of an empty signal");
  }
  const int n = static_cast<int>(signal.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Spectrum out(n);
  for (int xi = 0; xi < n; ++xi) {
    std::complex<double> acc{0.0, 0.0};
    for (int t = 0; t < n; ++t) {
      acc += signal[t] *
             detail::root_of_unity_power(n, static_cast<long long>(xi) * t);
    }
    out(xi) = scale * acc;
  }
  return out;
}

inline Spectrum forward_dft(const Vector& signal) {
  return forward_dft(std::span<const double>(signal.data(), signal.size()));
}

/// Extracts channel k of a control sequence as a length-N signal.
inline Vector channel_signal(const std::vector<Vector>& controls, int channel) {
  Vector out(static_cast<Eigen::Index>(controls.size()));
  for (std::size_t t = 0; t < controls.size(); ++t) out(t) = controls[t](channel);
  return out;
}

/// Per-channel banned frequencies over a horizon N. The allowed set W^(k) of
/// a channel is the complement of its banned set in {0, ..., N-1}.
class SupportSpec {
 public:
  SupportSpec() = default;

  static SupportSpec from_banned(int horizon,
                                 std::vector<std::vector<int>> banned) {
    if (horizon < 1) {
      throw Error(ErrorCode::kInvalidHorizon,
                  "support horizon must be positive");
    }
    SupportSpec s;
    s.horizon_ = horizon;
    for (std::size_t k = 0; k < banned.size(); ++k) {
      auto& set = banned[k];
      for (int xi : set) {
        if (xi < 0 || xi >= horizon) {
          throw Error(ErrorCode::kSpec,
                      "channel " + std::to_string(k) + ": frequency " +
                          std::to_string(xi) + " outside [0, " +
                          std::to_string(horizon - 1) + "]");
        }
      }
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
    }
    s.banned_ = std::move(banned);
    return s;
  }

  static SupportSpec from_allowed(int horizon,
                                  const std::vector<std::vector<int>>& allowed) {
    std::vector<std::vector<int>> banned(allowed.size());
    for (std::size_t k = 0; k < allowed.size(); ++k) {
      std::vector<bool> keep(horizon, false);
      for (int xi : allowed[k]) {
        if (xi < 0 || xi >= horizon) {
          throw Error(ErrorCode::kSpec,
                      "channel " + std::to_string(k) + ": frequency " +
                          std::to_string(xi) + " outside [0, " +
                          std::to_string(horizon - 1) + "]");
        }
        keep[xi] = true;
      }
      for (int xi = 0; xi < horizon; ++xi)
        if (!keep[xi]) banned[k].push_back(xi);
    }
    return from_banned(horizon, std::move(banned));
  }

  /// No banned frequencies on any of `channels` channels.
  static SupportSpec unconstrained(int horizon, int channels) {
    return from_banned(horizon, std::vector<std::vector<int>>(channels));
  }

  int horizon() const { return horizon_; }
  int channels() const { return static_cast<int>(banned_.size()); }
  const std::vector<int>& banned(int channel) const { return banned_.at(channel); }
  const std::vector<std::vector<int>>& banned_sets() const { return banned_; }

  std::vector<int> allowed(int channel) const {
    std::vector<int> out;
    const auto& b = banned_.at(channel);
    for (int xi = 0; xi < horizon_; ++xi)
      if (!std::binary_search(b.begin(), b.end(), xi)) out.push_back(xi);
    return out;
  }

  bool is_banned(int channel, int xi) const {
    const auto& b = banned_.at(channel);
    return std::binary_search(b.begin(), b.end(), xi);
  }

  bool empty() const {
    return std::all_of(banned_.begin(), banned_.end(),
                       [](const auto& b) { return b.empty(); });
  }

  /// Closes every banned set under xi -> (N - xi) mod N.
  SupportSpec symmetrized() const {
    std::vector<std::vector<int>> out = banned_;
    for (auto& set : out) {
      const std::size_t original = set.size();
      for (std::size_t i = 0; i < original; ++i)
        set.push_back((horizon_ - set[i]) % horizon_);
    }
    return from_banned(horizon_, std::move(out));
  }

  friend bool operator==(const SupportSpec&, const SupportSpec&) = default;

 private:
  int horizon_ = 0;
  std::vector<std::vector<int>> banned_;
};

/// Permutation P with P * (channel-stacked controls) = (time-stacked
/// controls). Channel-stacked index k*N + t maps to time-stacked t*m + k.
inline Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>
channel_stacking_permutation(int horizon, int channels) {
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm(
      horizon * channels);
  for (int k = 0; k < channels; ++k)
    for (int t = 0; t < horizon; ++t)
      perm.indices()(k * horizon + t) = t * channels + k;
  return perm;
}

/// Which DFT component a constraint row enforces.
struct ConstraintRow {
  enum class Part { kReal, kImag };
  int channel = 0;
  int frequency = 0;
  Part part = Part::kReal;

  friend bool operator==(const ConstraintRow&, const ConstraintRow&) = default;
};

/// The linear map u -> sum_t F_t u_t whose zero set is the set of control
/// trajectories with every banned DFT component equal to zero. Stored as one
/// q x (m N) matrix over the time-stacked controls; F_t is the column block
/// [t m, (t+1) m).
class FrequencyConstraint {
 public:
  FrequencyConstraint() = default;
  FrequencyConstraint(int horizon, int channels, Matrix stacked,
                      std::vector<ConstraintRow> rows, SupportSpec canonical)
      : horizon_(horizon),
        channels_(channels),
        stacked_(std::move(stacked)),
        rows_(std::move(rows)),
        canonical_(std::move(canonical)) {
    effective_rank_ = numerical_rank(stacked_);
  }

  int horizon() const { return horizon_; }
  int control_dim() const { return channels_; }
  int row_count() const { return static_cast<int>(stacked_.rows()); }
  int effective_rank() const { return effective_rank_; }
  bool full_row_rank() const { return effective_rank_ == row_count(); }

  const Matrix& stacked() const { return stacked_; }
  Matrix block(int t) const { return stacked_.middleCols(t * channels_, channels_); }
  std::vector<Matrix> blocks() const {
    std::vector<Matrix> out;
    out.reserve(horizon_);
    for (int t = 0; t < horizon_; ++t) out.push_back(block(t));
    return out;
  }

  const std::vector<ConstraintRow>& rows() const { return rows_; }
  const SupportSpec& canonical_supports() const { return canonical_; }

  /// Same zero set with linearly dependent rows dropped, so that
  /// row_count() == effective_rank(). Rows are kept in their original order;
  /// the pivoted QR decides which representatives survive.
  FrequencyConstraint reduced() const {
    if (full_row_rank()) return *this;
    Eigen::ColPivHouseholderQR<Matrix> qr(stacked_.transpose());
    std::vector<int> keep;
    for (int i = 0; i < effective_rank_; ++i)
      keep.push_back(qr.colsPermutation().indices()(i));
    std::sort(keep.begin(), keep.end());
    Matrix sub(static_cast<Eigen::Index>(keep.size()), stacked_.cols());
    std::vector<ConstraintRow> sub_rows;
    for (std::size_t i = 0; i < keep.size(); ++i) {
      sub.row(static_cast<Eigen::Index>(i)) = stacked_.row(keep[i]);
      sub_rows.push_back(rows_[keep[i]]);
    }
    return FrequencyConstraint(horizon_, channels_, std::move(sub),
                               std::move(sub_rows), canonical_);
  }

  /// Empty constraint (q = 0) for N steps and m channels.
  static FrequencyConstraint none(int horizon, int channels) {
    return FrequencyConstraint(horizon, channels,
                               Matrix(0, static_cast<Eigen::Index>(horizon) * channels),
                               {}, SupportSpec::unconstrained(horizon, channels));
  }

 private:
  int horizon_ = 0;
  int channels_ = 0;
  Matrix stacked_;
  std::vector<ConstraintRow> rows_;
  SupportSpec canonical_;
  int effective_rank_ = 0;
};

inline constexpr double kZeroRowThreshold = 1e-12;

/// Band-stop selection of the banned components, split into real and
/// imaginary rows, moved from channel-stacked to time-stacked columns, with
/// identically zero rows (e.g. the imaginary part at xi = 0 and xi = N/2)
/// removed. Mirrored pairs xi, N - xi both appear, so q may exceed the
/// effective rank; see FrequencyConstraint::reduced().
inline FrequencyConstraint build_frequency_constraint(const SupportSpec& supports,
                                                      int horizon, int channels) {
  if (horizon < 1) {
    throw Error(ErrorCode::kInvalidHorizon, "horizon must be positive");
  }
  if (channels < 1) {
    throw Error(ErrorCode::kSpec, "control dimension must be positive");
  }
  if (supports.channels() != channels) {
    throw Error(ErrorCode::kSpec,
                "support spec has " + std::to_string(supports.channels()) +
                    " channels, expected " + std::to_string(channels));
  }
  if (supports.horizon() != horizon) {
    throw Error(ErrorCode::kSpec,
                "support spec horizon " + std::to_string(supports.horizon()) +
                    " does not match " + std::to_string(horizon));
  }

  const SupportSpec canonical = supports.symmetrized();
  const DftMatrix phi = build_dft_matrix(horizon);
  const int mn = horizon * channels;

  // Rows of [S Phi_real; S Phi_imag] over channel-stacked controls.
  std::vector<ConstraintRow> labels;
  std::vector<Eigen::RowVectorXd> raw;
  for (auto part : {ConstraintRow::Part::kReal, ConstraintRow::Part::kImag}) {
    for (int k = 0; k < channels; ++k) {
      for (int xi : canonical.banned(k)) {
        Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(mn);
        for (int t = 0; t < horizon; ++t) {
          row(k * horizon + t) = part == ConstraintRow::Part::kReal
                                     ? phi(xi, t).real()
                                     : phi(xi, t).imag();
        }
        raw.push_back(std::move(row));
        labels.push_back({k, xi, part});
      }
    }
  }

  Matrix channel_stacked(static_cast<Eigen::Index>(raw.size()), mn);
  for (std::size_t i = 0; i < raw.size(); ++i)
    channel_stacked.row(static_cast<Eigen::Index>(i)) = raw[i];

  // F_cs * u_cs = F_cs * P^{-1} * u_ts.
  const auto perm = channel_stacking_permutation(horizon, channels);
  const Matrix time_stacked = channel_stacked * perm.inverse();

  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < time_stacked.rows(); ++i)
    if (time_stacked.row(i).cwiseAbs().maxCoeff() >= kZeroRowThreshold)
      kept.push_back(i);

  Matrix stacked(static_cast<Eigen::Index>(kept.size()), mn);
  std::vector<ConstraintRow> rows;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    stacked.row(static_cast<Eigen::Index>(i)) = time_stacked.row(kept[i]);
    rows.push_back(labels[kept[i]]);
  }
  return FrequencyConstraint(horizon, channels, std::move(stacked),
                             std::move(rows), canonical);
}

/// sum_t F_t u_t.
inline Vector constraint_residual(const FrequencyConstraint& fc,
                                  const std::vector<Vector>& controls) {
  if (static_cast<int>(controls.size()) != fc.horizon()) {
    throw Error(ErrorCode::kShape,
                "expected " + std::to_string(fc.horizon()) +
                    " controls, got " + std::to_string(controls.size()));
  }
  for (std::size_t t = 0; t < controls.size(); ++t) {
    if (controls[t].size() != fc.control_dim()) {
      throw Error(ErrorCode::kShape,
                  "control " + std::to_string(t) + " has dimension " +
                      std::to_string(controls[t].size()) + ", expected " +
                      std::to_string(fc.control_dim()));
    }
  }
  return fc.stacked() * stack(controls);
}

struct UncertaintyReport {
  int channel = 0;
  int time_support = 0;
  int freq_support = 0;
  double lower_bound = 0.0;  // 2 sqrt(N)
  bool vacuous = false;      // identically zero channel
  bool satisfied = true;
};

inline constexpr double kDefaultSupportTolerance = 1e-10;

/// Time-frequency support count per channel. An entry counts as zero when
/// its magnitude is at most tolerance * max(1, max_t |u_t|).
inline std::vector<UncertaintyReport> uncertainty_check(
    const std::vector<Vector>& controls,
    double tolerance = kDefaultSupportTolerance) {
  if (controls.empty()) {
    throw Error(ErrorCode::kInvalidInput, "empty control trajectory");
  }
  const int n = static_cast<int>(controls.size());
  const int m = static_cast<int>(controls.front().size());
  std::vector<UncertaintyReport> out;
  for (int k = 0; k < m; ++k) {
    const Vector signal = channel_signal(controls, k);
    UncertaintyReport r;
    r.channel = k;
    r.lower_bound = 2.0 * std::sqrt(static_cast<double>(n));
    const double peak = max_abs(signal);
    const double thr = tolerance * std::max(1.0, peak);
    if (peak <= thr) {
      r.vacuous = true;
      out.push_back(r);
      continue;
    }
    const Spectrum spec = forward_dft(signal);
    for (int t = 0; t < n; ++t)
      if (std::abs(signal(t)) > thr) ++r.time_support;
    for (int xi = 0; xi < n; ++xi)
      if (std::abs(spec(xi)) > thr) ++r.freq_support;
    r.satisfied = r.time_support + r.freq_support >= r.lower_bound;
    out.push_back(r);
  }
  return out;
}

}  // namespace pmpfreq
