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

// Result documents and the per-channel spectrum table.
//
// Numbers are written in the shortest form that reads back to the same
// double (at most 17 significant digits), so identical runs give identical
// files. Non-finite values are written as null.

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pmpfreq/extremal.hpp"
#include "pmpfreq/io/problem_file.hpp"
#include "pmpfreq/shooting.hpp"
#include "pmpfreq/spectrum.hpp"

namespace pmpfreq::io {

inline Json sequence_json(const std::vector<Vector>& seq) {
  Json a = Json::array();
  for (const auto& v : seq) a.push_back(detail::vector_json(v));
  return a;
}

inline Json check_json(const ConditionCheck& c) {
  return {{"residual", c.residual}, {"bound", c.bound}, {"pass", c.pass}};
}

inline Json certificate_json(const PmpCertificate& c) {
  Json j;
  j["tolerance"] = c.tolerance;
  j["pass"] = c.pass;
  j["nonneg"] = c.nonneg;
  j["nontrivial"] = c.nontrivial;
  j["state_dynamics"] = check_json(c.state_dynamics);
  j["adjoint_dynamics"] = check_json(c.adjoint_dynamics);
  j["transversality"] = check_json(c.transversality);
  j["dual_cone"] = check_json(c.dual_cone);
  j["hamiltonian_vi"] = check_json(c.hamiltonian_vi);
  j["frequency"] = check_json(c.frequency);
  j["feasibility"] = check_json(c.feasibility);
  j["failures"] = c.failures();
  return j;
}

inline Json normality_json(const NormalityVerdict& v) {
  return {{"classification", to_string(v.classification)},
          {"rank_reachability", v.rank_reachability},
          {"rank_augmented", v.rank_augmented},
          {"state_dim", v.state_dim},
          {"control_dim", v.control_dim},
          {"horizon", v.horizon},
          {"constraint_rows", v.constraint_rows}};
}

inline Json lift_json(const ExtremalLift& lift) {
  return {{"eta_c", lift.eta_c},
          {"nu", detail::vector_json(lift.nu)},
          {"adjoints", sequence_json(lift.adjoints)},
          {"state_multipliers", sequence_json(lift.state_multipliers)}};
}

inline Json uncertainty_json(const std::vector<UncertaintyReport>& reports) {
  Json a = Json::array();
  for (const auto& r : reports)
    a.push_back({{"channel", r.channel},
                  {"time_support", r.time_support},
                  {"freq_support", r.freq_support},
                  {"lower_bound", r.lower_bound},
                  {"vacuous", r.vacuous},
                  {"satisfied", r.satisfied}});
  return a;
}

inline Json trace_json(const std::vector<IterationRecord>& trace) {
  Json a = Json::array();
  for (const auto& r : trace)
    a.push_back({{"iteration", r.iteration}, {"residual", r.residual}, {"step", r.step}});
  return a;
}

/// Magnitude, phase and banned flag of every DFT component of every channel.
inline Json spectra_json(const std::vector<Vector>& controls, const SupportSpec& banned) {
  Json a = Json::array();
  if (controls.empty()) return a;
  const int m = static_cast<int>(controls.front().size());
  for (int k = 0; k < m; ++k) {
    const Spectrum s = forward_dft(channel_signal(controls, k));
    Json mag = Json::array(), phase = Json::array(), flag = Json::array();
    for (Eigen::Index xi = 0; xi < s.size(); ++xi) {
      mag.push_back(std::abs(s(xi)));
      phase.push_back(std::arg(s(xi)));
      flag.push_back(k < banned.channels() && banned.is_banned(k, static_cast<int>(xi)));
    }
    a.push_back({{"channel", k}, {"magnitude", mag}, {"phase", phase}, {"banned", flag}});
  }
  return a;
}

struct SpectrumRow {
  int channel = 0;
  int frequency = 0;
  double magnitude = 0.0;
  double phase = 0.0;
  bool banned = false;
};

/// Rows xi = 0..N-1 for each channel of the result's controls. Banned flags
/// follow the (symmetrized) banned sets recorded in the result.
inline std::vector<SpectrumRow> spectrum_report(const Json& result) {
  if (!result.contains("controls") || !result["controls"].is_array())
    throw Error(ErrorCode::kInvalidInput, "result has no controls");
  const Json& c = result["controls"];
  std::vector<Vector> controls;
  for (const auto& row : c) {
    Vector v(static_cast<Eigen::Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i)
      v(static_cast<Eigen::Index>(i)) = row[i].is_number() ? row[i].get<double>()
                                                           : std::numeric_limits<double>::quiet_NaN();
    controls.push_back(v);
  }
  std::vector<SpectrumRow> rows;
  if (controls.empty()) return rows;
  const int N = static_cast<int>(controls.size());
  const int m = static_cast<int>(controls.front().size());
  std::vector<std::vector<int>> banned(m);
  if (result.contains("banned_frequencies") && result["banned_frequencies"].is_array()) {
    const Json& b = result["banned_frequencies"];
    for (int k = 0; k < m && k < static_cast<int>(b.size()); ++k)
      for (const auto& xi : b[k])
        if (xi.is_number_integer() && xi.get<int>() >= 0 && xi.get<int>() < N)
          banned[k].push_back(xi.get<int>());
  }
  const auto supports = SupportSpec::from_banned(N, banned);
  for (int k = 0; k < m; ++k) {
    const Spectrum s = forward_dft(channel_signal(controls, k));
    for (int xi = 0; xi < N; ++xi)
      rows.push_back({k, xi, std::abs(s(xi)), std::arg(s(xi)), supports.is_banned(k, xi)});
  }
  return rows;
}

inline std::string spectrum_csv(const std::vector<SpectrumRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "channel,frequency,magnitude,phase,banned\n";
  for (const auto& r : rows)
    os << r.channel << ',' << r.frequency << ',' << r.magnitude << ',' << r.phase << ','
       << (r.banned ? 1 : 0) << '\n';
  return os.str();
}

}  // namespace pmpfreq::io
