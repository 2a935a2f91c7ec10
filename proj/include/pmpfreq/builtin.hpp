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

// Named toy systems shipped with the CLI.

#pragma once

#include <string>
#include <vector>

#include "pmpfreq/problem.hpp"

namespace pmpfreq::builtin {

/// x_{t+1} = x_t + u_t.
inline LtiDynamics scalar_integrator() {
  return {Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
}

/// Position/velocity with unit-free sampling step dt.
inline LtiDynamics double_integrator(double dt = 1.0) {
  LtiDynamics d;
  d.A.resize(2, 2);
  d.A << 1.0, dt,
         0.0, 1.0;
  d.B.resize(2, 1);
  d.B << 0.5 * dt * dt,
         dt;
  return d;
}

/// x_{t+1} = x_t + (1 + gain x_t) u_t, scalar.
inline ControlAffineDynamics affine_toy(double gain = 0.1) {
  ControlAffineDynamics d;
  d.state_dim = 1;
  d.control_dim = 1;
  d.drift = [](int, const Vector& x) { return x; };
  d.drift_jacobian = [](int, const Vector&) { return Matrix::Identity(1, 1); };
  d.input_matrix = [gain](int, const Vector& x) {
    Matrix b(1, 1);
    b(0, 0) = 1.0 + gain * x(0);
    return b;
  };
  d.input_jacobian = [gain](int, const Vector&, const Vector& u) {
    Matrix j(1, 1);
    j(0, 0) = gain * u(0);
    return j;
  };
  d.name = "affine_toy";
  d.parameters["gain"] = gain;
  return d;
}

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> kNames = {
      "scalar_integrator", "double_integrator", "affine_toy"};
  return kNames;
}

}  // namespace pmpfreq::builtin
