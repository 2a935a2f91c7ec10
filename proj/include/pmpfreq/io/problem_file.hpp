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

// JSON problem files.
//
//   {
//     "horizon": 6,
//     "dynamics": {"kind": "lti", "A": [[1]], "B": [[1]]},
//     "cost": {"Q": [[1]], "R": [[1]], "general": false},
//     "boundary": {"x0": [0], "xf": [1]},            // "xf": "free" allowed
//     "control_sets": {"lower": [-1], "upper": [1]},  // or one entry per stage
//     "state_sets": [null, {"kind": "box", ...}, ...], // N + 1 entries
//     "banned_frequencies": [[1, 5]],                 // one list per channel
//     "solver": "transfer_freq",
//     "options": {"tolerance": 1e-7, "max_iterations": 60}
//   }
//
// Dynamics may name a catalog entry instead of matrices:
// {"builtin": "double_integrator", "dt": 0.5} or
// {"kind": "control_affine", "builtin": "affine_toy", "gain": 0.1}.
// Matrices are row-major nested lists. Catalog LTI systems are expanded to
// matrices when read, so a re-serialized file carries A and B explicitly.

#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmpfreq/builtin.hpp"
#include "pmpfreq/problem.hpp"

namespace pmpfreq::io {

using Json = nlohmann::ordered_json;

enum class SolverKind { kRiccati, kLqPmp, kTransfer, kTransferFreq, kShooting };

inline const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::kRiccati: return "riccati";
    case SolverKind::kLqPmp: return "lq_pmp";
    case SolverKind::kTransfer: return "transfer";
    case SolverKind::kTransferFreq: return "transfer_freq";
    case SolverKind::kShooting: return "shooting";
  }
  return "?";
}

inline std::optional<SolverKind> solver_from_string(const std::string& s) {
  for (auto k : {SolverKind::kRiccati, SolverKind::kLqPmp, SolverKind::kTransfer,
                 SolverKind::kTransferFreq, SolverKind::kShooting})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

namespace detail {
inline bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}
}  // namespace detail

struct DynamicsEntry {
  DynamicsModel::Kind kind = DynamicsModel::Kind::kLti;
  Matrix A;  // kLti
  Matrix B;
  std::string builtin;  // kControlAffine
  std::map<std::string, double> parameters;

  friend bool operator==(const DynamicsEntry& a, const DynamicsEntry& b) {
    return a.kind == b.kind && detail::same_matrix(a.A, b.A) && detail::same_matrix(a.B, b.B) &&
           a.builtin == b.builtin && a.parameters == b.parameters;
  }
};

struct CostEntry {
  Matrix Q;
  Matrix R;
  bool general = false;  // evaluate through the generic gradient interface

  friend bool operator==(const CostEntry& a, const CostEntry& b) {
    return detail::same_matrix(a.Q, b.Q) && detail::same_matrix(a.R, b.R) &&
           a.general == b.general;
  }
};

struct SolverOptions {
  std::optional<double> tolerance;  // certificate tolerance
  int max_iterations = 60;
  double newton_tolerance = 1e-10;
  double support_tolerance = kDefaultSupportTolerance;
  bool finite_difference_jacobian = false;

  friend bool operator==(const SolverOptions&, const SolverOptions&) = default;
};

struct ProblemFile {
  int horizon = 0;
  DynamicsEntry dynamics;
  CostEntry cost;
  std::vector<StateSet> state_sets;  // N + 1, endpoints from "boundary"
  std::vector<ControlSet> control_sets;
  std::vector<std::vector<int>> banned;
  SolverKind solver = SolverKind::kTransferFreq;
  SolverOptions options;

  const Vector& x0() const { return state_sets.front().point; }
  bool free_endpoint() const { return state_sets.back().kind != StateSet::Kind::kFixed; }

  friend bool operator==(const ProblemFile&, const ProblemFile&) = default;
};

/// One problem-file complaint, anchored at a line (syntax errors) or a JSON
/// pointer (everything else).
struct FileIssue {
  std::string path;
  int line = 0;
  std::string message;

  std::string to_string() const {
    std::string where = line > 0 ? "line " + std::to_string(line) : path;
    if (where.empty()) where = "/";
    return where + ": " + message;
  }
};

class ProblemFileError : public Error {
 public:
  explicit ProblemFileError(std::vector<FileIssue> issues)
      : Error(ErrorCode::kSpec, summarize(issues)), issues_(std::move(issues)) {}
  const std::vector<FileIssue>& issues() const { return issues_; }

 private:
  static std::string summarize(const std::vector<FileIssue>& issues) {
    std::string s;
    for (const auto& i : issues) s += (s.empty() ? "" : "\n") + i.to_string();
    return s;
  }
  std::vector<FileIssue> issues_;
};

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

class Reader {
 public:
  std::vector<FileIssue> issues;

  void fail(const std::string& path, const std::string& message) {
    issues.push_back({path, 0, message});
  }

  std::optional<double> number(const Json& j, const std::string& path) {
    if (!j.is_number()) {
      fail(path, "expected a number");
      return std::nullopt;
    }
    return j.get<double>();
  }

  std::optional<int> integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) {
      fail(path, "expected an integer");
      return std::nullopt;
    }
    return j.get<int>();
  }

  std::optional<Vector> vector(const Json& j, const std::string& path) {
    if (!j.is_array()) {
      fail(path, "expected a list of numbers");
      return std::nullopt;
    }
    Vector v(static_cast<Eigen::Index>(j.size()));
    bool ok = true;
    for (std::size_t i = 0; i < j.size(); ++i) {
      auto x = number(j[i], path + "/" + std::to_string(i));
      if (x) v(static_cast<Eigen::Index>(i)) = *x; else ok = false;
    }
    return ok ? std::optional<Vector>(v) : std::nullopt;
  }

  std::optional<Matrix> matrix(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) {
      fail(path, "expected a non-empty list of rows");
      return std::nullopt;
    }
    std::vector<Vector> rows;
    for (std::size_t i = 0; i < j.size(); ++i) {
      auto r = vector(j[i], path + "/" + std::to_string(i));
      if (!r) return std::nullopt;
      rows.push_back(*r);
    }
    const Eigen::Index cols = rows.front().size();
    Matrix out(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != cols) {
        fail(path + "/" + std::to_string(i), "row has " + std::to_string(rows[i].size()) +
                                                 " entries, expected " + std::to_string(cols));
        return std::nullopt;
      }
      out.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    }
    return out;
  }

  void only_keys(const Json& j, const std::string& path,
                 std::initializer_list<const char*> allowed) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const bool known = std::any_of(allowed.begin(), allowed.end(),
                                     [&](const char* k) { return it.key() == k; });
      if (!known) fail(path + "/" + it.key(), "unknown key");
    }
  }
};

inline std::optional<DynamicsEntry> read_dynamics(Reader& rd, const Json& j) {
  const std::string path = "/dynamics";
  if (!j.is_object()) {
    rd.fail(path, "expected an object");
    return std::nullopt;
  }
  rd.only_keys(j, path, {"kind", "A", "B", "builtin", "dt", "gain"});
  std::string kind = "lti";
  if (j.contains("kind")) {
    if (!j["kind"].is_string()) {
      rd.fail(path + "/kind", "expected \"lti\" or \"control_affine\"");
      return std::nullopt;
    }
    kind = j["kind"].get<std::string>();
  } else if (j.contains("builtin") && j["builtin"] == "affine_toy") {
    kind = "control_affine";
  }
  DynamicsEntry d;
  auto param = [&](const char* key, double fallback) -> std::optional<double> {
    if (!j.contains(key)) return fallback;
    return rd.number(j[key], path + "/" + key);
  };

  if (kind == "lti") {
    d.kind = DynamicsModel::Kind::kLti;
    if (j.contains("builtin")) {
      const auto name = j["builtin"].is_string() ? j["builtin"].get<std::string>() : "";
      if (j.contains("gain")) rd.fail(path + "/gain", "only valid for affine_toy");
      if (name == "scalar_integrator") {
        if (j.contains("dt")) rd.fail(path + "/dt", "only valid for double_integrator");
        const auto s = builtin::scalar_integrator();
        d.A = s.A;
        d.B = s.B;
      } else if (name == "double_integrator") {
        const auto dt = param("dt", 1.0);
        if (!dt) return std::nullopt;
        const auto s = builtin::double_integrator(*dt);
        d.A = s.A;
        d.B = s.B;
      } else {
        rd.fail(path + "/builtin", "unknown LTI builtin \"" + name +
                                       "\" (scalar_integrator, double_integrator)");
        return std::nullopt;
      }
      if (j.contains("A") || j.contains("B"))
        rd.fail(path, "give either a builtin or the matrices A and B, not both");
      return d;
    }
    if (!j.contains("A") || !j.contains("B")) {
      rd.fail(path, "LTI dynamics need A and B (or a builtin)");
      return std::nullopt;
    }
    auto A = rd.matrix(j["A"], path + "/A");
    auto B = rd.matrix(j["B"], path + "/B");
    if (!A || !B) return std::nullopt;
    d.A = *A;
    d.B = *B;
    return d;
  }
  if (kind == "control_affine") {
    d.kind = DynamicsModel::Kind::kControlAffine;
    if (!j.contains("builtin") || j["builtin"] != "affine_toy") {
      rd.fail(path + "/builtin",
              "control_affine dynamics must name a builtin model (affine_toy)");
      return std::nullopt;
    }
    for (const char* k : {"A", "B", "dt"})
      if (j.contains(k)) rd.fail(path + "/" + k, "not valid for affine_toy");
    const auto gain = param("gain", 0.1);
    if (!gain) return std::nullopt;
    d.builtin = "affine_toy";
    d.parameters["gain"] = *gain;
    return d;
  }
  rd.fail(path + "/kind", "unknown kind \"" + kind + "\" (lti, control_affine)");
  return std::nullopt;
}

inline std::optional<StateSet> read_state_set(Reader& rd, const Json& j, const std::string& path) {
  if (!j.is_object()) {
    rd.fail(path, "expected an object or null");
    return std::nullopt;
  }
  rd.only_keys(j, path, {"kind", "point", "lower", "upper"});
  std::string kind = j.contains("kind") && j["kind"].is_string() ? j["kind"].get<std::string>()
                     : j.contains("point")                        ? "fixed"
                     : j.contains("lower")                        ? "box"
                                                                  : "free";
  if (kind == "free") return StateSet::free();
  if (kind == "fixed") {
    if (!j.contains("point")) {
      rd.fail(path, "fixed set needs \"point\"");
      return std::nullopt;
    }
    auto p = rd.vector(j["point"], path + "/point");
    return p ? std::optional<StateSet>(StateSet::fixed(*p)) : std::nullopt;
  }
  if (kind == "box") {
    if (!j.contains("lower") || !j.contains("upper")) {
      rd.fail(path, "box needs \"lower\" and \"upper\"");
      return std::nullopt;
    }
    auto lo = rd.vector(j["lower"], path + "/lower");
    auto hi = rd.vector(j["upper"], path + "/upper");
    if (!lo || !hi) return std::nullopt;
    return StateSet::box(*lo, *hi);
  }
  rd.fail(path + "/kind", "unknown state set kind \"" + kind + "\" (free, fixed, box)");
  return std::nullopt;
}

inline std::optional<ControlSet> read_control_set(Reader& rd, const Json& j,
                                                  const std::string& path) {
  if (j.is_null()) return ControlSet::free();
  if (!j.is_object()) {
    rd.fail(path, "expected an object or null");
    return std::nullopt;
  }
  rd.only_keys(j, path, {"kind", "lower", "upper"});
  std::string kind = j.contains("kind") && j["kind"].is_string() ? j["kind"].get<std::string>()
                     : j.contains("lower")                        ? "box"
                                                                  : "free";
  if (kind == "free") return ControlSet::free();
  if (kind == "box") {
    if (!j.contains("lower") || !j.contains("upper")) {
      rd.fail(path, "box needs \"lower\" and \"upper\"");
      return std::nullopt;
    }
    auto lo = rd.vector(j["lower"], path + "/lower");
    auto hi = rd.vector(j["upper"], path + "/upper");
    if (!lo || !hi) return std::nullopt;
    return ControlSet::box(*lo, *hi);
  }
  rd.fail(path + "/kind", "unknown control set kind \"" + kind + "\" (free, box)");
  return std::nullopt;
}

}  // namespace detail

/// Parses JSON text. Throws ProblemFileError with a line number on syntax
/// errors.
inline Json parse_json_text(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::string msg = e.what();
    const auto colon = msg.find("syntax error");
    if (colon != std::string::npos) msg = msg.substr(colon);
    throw ProblemFileError({{"", detail::line_of_offset(text, e.byte), msg}});
  }
}

/// Reads the document structure. Semantic checks that need the assembled
/// problem (definiteness, dimensions) are left to validate().
inline ProblemFile problem_from_json(const Json& doc) {
  detail::Reader rd;
  ProblemFile pf;
  if (!doc.is_object()) throw ProblemFileError({{"/", 0, "expected a JSON object"}});
  rd.only_keys(doc, "", {"horizon", "dynamics", "cost", "boundary", "control_sets", "state_sets",
                         "banned_frequencies", "solver", "options"});
  bool missing = false;
  for (const char* key : {"horizon", "dynamics", "cost", "boundary"}) {
    if (!doc.contains(key)) {
      rd.fail(std::string("/") + key, "missing required key");
      missing = true;
    }
  }
  if (missing) throw ProblemFileError(rd.issues);

  auto horizon = rd.integer(doc["horizon"], "/horizon");
  if (horizon && *horizon < 1) {
    rd.fail("/horizon", "must be at least 1");
    horizon.reset();
  }
  const int N = horizon.value_or(0);
  pf.horizon = N;

  auto dyn = detail::read_dynamics(rd, doc["dynamics"]);
  if (dyn) pf.dynamics = *dyn;

  const Json& cost = doc["cost"];
  if (!cost.is_object()) {
    rd.fail("/cost", "expected an object");
  } else {
    rd.only_keys(cost, "/cost", {"Q", "R", "general"});
    if (!cost.contains("Q") || !cost.contains("R")) rd.fail("/cost", "cost needs Q and R");
    if (cost.contains("Q"))
      if (auto Q = rd.matrix(cost["Q"], "/cost/Q")) pf.cost.Q = *Q;
    if (cost.contains("R"))
      if (auto R = rd.matrix(cost["R"], "/cost/R")) pf.cost.R = *R;
    if (cost.contains("general")) {
      if (cost["general"].is_boolean())
        pf.cost.general = cost["general"].get<bool>();
      else
        rd.fail("/cost/general", "expected true or false");
    }
  }

  const Json& boundary = doc["boundary"];
  std::optional<Vector> x0;
  std::optional<Vector> xf;
  bool free_end = false;
  if (!boundary.is_object() || !boundary.contains("x0") || !boundary.contains("xf")) {
    rd.fail("/boundary", "expected an object with \"x0\" and \"xf\"");
  } else {
    rd.only_keys(boundary, "/boundary", {"x0", "xf"});
    x0 = rd.vector(boundary["x0"], "/boundary/x0");
    if (boundary["xf"] == "free")
      free_end = true;
    else
      xf = rd.vector(boundary["xf"], "/boundary/xf");
  }

  if (N > 0) {
    pf.state_sets.assign(N + 1, StateSet::free());
    if (x0) pf.state_sets.front() = StateSet::fixed(*x0);
    if (xf) pf.state_sets.back() = StateSet::fixed(*xf);
    if (doc.contains("state_sets")) {
      const Json& ss = doc["state_sets"];
      if (!ss.is_array() || static_cast<int>(ss.size()) != N + 1) {
        rd.fail("/state_sets", "expected a list of " + std::to_string(N + 1) + " entries");
      } else {
        for (int t = 0; t <= N; ++t) {
          const std::string path = "/state_sets/" + std::to_string(t);
          if (ss[t].is_null()) continue;
          auto set = detail::read_state_set(rd, ss[t], path);
          if (!set) continue;
          const bool endpoint = t == 0 || t == N;
          if (endpoint && (t == 0 || !free_end)) {
            if (!(*set == pf.state_sets[t]))
              rd.fail(path, "disagrees with \"boundary\"; use null or the same fixed point");
            continue;
          }
          if (t == N && set->kind == StateSet::Kind::kFixed) {
            rd.fail(path, "fixed terminal state must be given in \"boundary/xf\"");
            continue;
          }
          pf.state_sets[t] = *set;
        }
      }
    }

    pf.control_sets.assign(N, ControlSet::free());
    if (doc.contains("control_sets")) {
      const Json& cs = doc["control_sets"];
      if (cs.is_array()) {
        if (static_cast<int>(cs.size()) != N) {
          rd.fail("/control_sets", "expected " + std::to_string(N) + " entries");
        } else {
          for (int t = 0; t < N; ++t)
            if (auto c = detail::read_control_set(rd, cs[t], "/control_sets/" + std::to_string(t)))
              pf.control_sets[t] = *c;
        }
      } else if (auto c = detail::read_control_set(rd, cs, "/control_sets")) {
        pf.control_sets.assign(N, *c);
      }
    }
  }

  if (doc.contains("banned_frequencies")) {
    const Json& b = doc["banned_frequencies"];
    if (!b.is_array()) {
      rd.fail("/banned_frequencies", "expected one list of frequencies per channel");
    } else {
      for (std::size_t k = 0; k < b.size(); ++k) {
        const std::string path = "/banned_frequencies/" + std::to_string(k);
        std::vector<int> set;
        if (!b[k].is_array()) {
          rd.fail(path, "expected a list of integers");
        } else {
          for (std::size_t i = 0; i < b[k].size(); ++i) {
            const std::string ip = path + "/" + std::to_string(i);
            auto xi = rd.integer(b[k][i], ip);
            if (!xi) continue;
            if (N > 0 && (*xi < 0 || *xi >= N))
              rd.fail(ip, "frequency " + std::to_string(*xi) + " outside [0, " +
                              std::to_string(N - 1) + "]");
            else
              set.push_back(*xi);
          }
        }
        pf.banned.push_back(std::move(set));
      }
    }
  }

  if (doc.contains("solver")) {
    const auto s = doc["solver"].is_string()
                       ? solver_from_string(doc["solver"].get<std::string>())
                       : std::nullopt;
    if (s)
      pf.solver = *s;
    else
      rd.fail("/solver", "expected one of riccati, lq_pmp, transfer, transfer_freq, shooting");
  }

  if (doc.contains("options")) {
    const Json& o = doc["options"];
    if (!o.is_object()) {
      rd.fail("/options", "expected an object");
    } else {
      rd.only_keys(o, "/options", {"tolerance", "max_iterations", "newton_tolerance",
                                   "support_tolerance", "finite_difference_jacobian"});
      auto positive = [&](const char* key) -> std::optional<double> {
        if (!o.contains(key)) return std::nullopt;
        auto v = rd.number(o[key], std::string("/options/") + key);
        if (v && !(*v > 0.0)) {
          rd.fail(std::string("/options/") + key, "must be positive");
          return std::nullopt;
        }
        return v;
      };
      pf.options.tolerance = positive("tolerance");
      if (auto v = positive("newton_tolerance")) pf.options.newton_tolerance = *v;
      if (auto v = positive("support_tolerance")) pf.options.support_tolerance = *v;
      if (o.contains("max_iterations")) {
        auto it = rd.integer(o["max_iterations"], "/options/max_iterations");
        if (it && *it < 1)
          rd.fail("/options/max_iterations", "must be at least 1");
        else if (it)
          pf.options.max_iterations = *it;
      }
      if (o.contains("finite_difference_jacobian")) {
        if (o["finite_difference_jacobian"].is_boolean())
          pf.options.finite_difference_jacobian = o["finite_difference_jacobian"].get<bool>();
        else
          rd.fail("/options/finite_difference_jacobian", "expected true or false");
      }
    }
  }

  if (!rd.issues.empty()) throw ProblemFileError(rd.issues);
  return pf;
}

namespace detail {

inline Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json matrix_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(vector_json(m.row(i).transpose()));
  return a;
}

inline Json state_set_json(const StateSet& s) {
  switch (s.kind) {
    case StateSet::Kind::kFree: return {{"kind", "free"}};
    case StateSet::Kind::kFixed: return {{"kind", "fixed"}, {"point", vector_json(s.point)}};
    case StateSet::Kind::kBox:
      return {{"kind", "box"}, {"lower", vector_json(s.lower)}, {"upper", vector_json(s.upper)}};
  }
  return nullptr;
}

inline Json control_set_json(const ControlSet& c) {
  if (c.kind == ControlSet::Kind::kFree) return {{"kind", "free"}};
  return {{"kind", "box"}, {"lower", vector_json(c.lower)}, {"upper", vector_json(c.upper)}};
}

}  // namespace detail

inline Json problem_to_json(const ProblemFile& pf) {
  Json doc;
  doc["horizon"] = pf.horizon;
  Json dyn;
  if (pf.dynamics.kind == DynamicsModel::Kind::kLti) {
    dyn["kind"] = "lti";
    dyn["A"] = detail::matrix_json(pf.dynamics.A);
    dyn["B"] = detail::matrix_json(pf.dynamics.B);
  } else {
    dyn["kind"] = "control_affine";
    dyn["builtin"] = pf.dynamics.builtin;
    for (const auto& [k, v] : pf.dynamics.parameters) dyn[k] = v;
  }
  doc["dynamics"] = dyn;
  doc["cost"] = {{"Q", detail::matrix_json(pf.cost.Q)},
                 {"R", detail::matrix_json(pf.cost.R)},
                 {"general", pf.cost.general}};
  doc["boundary"] = {{"x0", detail::vector_json(pf.x0())},
                     {"xf", pf.free_endpoint() ? Json("free")
                                               : detail::vector_json(pf.state_sets.back().point)}};
  Json cs = Json::array();
  for (const auto& c : pf.control_sets) cs.push_back(detail::control_set_json(c));
  doc["control_sets"] = cs;
  Json ss = Json::array();
  for (int t = 0; t <= pf.horizon; ++t) {
    const bool from_boundary = t == 0 || (t == pf.horizon && !pf.free_endpoint());
    ss.push_back(from_boundary ? Json(nullptr) : detail::state_set_json(pf.state_sets[t]));
  }
  doc["state_sets"] = ss;
  doc["banned_frequencies"] = pf.banned;
  doc["solver"] = to_string(pf.solver);
  Json opts;
  if (pf.options.tolerance) opts["tolerance"] = *pf.options.tolerance;
  opts["max_iterations"] = pf.options.max_iterations;
  opts["newton_tolerance"] = pf.options.newton_tolerance;
  opts["support_tolerance"] = pf.options.support_tolerance;
  opts["finite_difference_jacobian"] = pf.options.finite_difference_jacobian;
  doc["options"] = opts;
  return doc;
}

inline DynamicsModel make_dynamics(const DynamicsEntry& d) {
  if (d.kind == DynamicsModel::Kind::kLti) return LtiDynamics{d.A, d.B};
  if (d.builtin == "affine_toy") {
    const auto it = d.parameters.find("gain");
    return builtin::affine_toy(it == d.parameters.end() ? 0.1 : it->second);
  }
  throw Error(ErrorCode::kSpec, "unknown dynamics builtin \"" + d.builtin + "\"");
}

/// Assembles the (unvalidated) problem spec described by the file.
inline ProblemSpec to_spec(const ProblemFile& pf) {
  ProblemSpec spec;
  spec.horizon = pf.horizon;
  spec.dynamics = make_dynamics(pf.dynamics);
  CostModel cost = QuadraticCost{pf.cost.Q, pf.cost.R};
  spec.cost = pf.cost.general ? cost.as_general() : cost;
  spec.state_sets = pf.state_sets;
  spec.control_sets = pf.control_sets;
  auto banned = pf.banned;
  if (banned.empty()) banned.resize(static_cast<std::size_t>(std::max(spec.control_dim(), 0)));
  spec.supports = SupportSpec::from_banned(std::max(pf.horizon, 1), std::move(banned));
  return spec;
}

/// Inverse of to_spec() for specs built from the supported dynamics. Solver
/// and options are not part of a ProblemSpec and are passed through.
inline ProblemFile from_spec(const ProblemSpec& spec, SolverKind solver = SolverKind::kTransferFreq,
                             const SolverOptions& options = {}) {
  ProblemFile pf;
  pf.horizon = spec.horizon;
  if (const auto* lti = spec.dynamics.lti()) {
    pf.dynamics.kind = DynamicsModel::Kind::kLti;
    pf.dynamics.A = lti->A;
    pf.dynamics.B = lti->B;
  } else if (const auto* ca = spec.dynamics.control_affine(); ca && !ca->name.empty()) {
    pf.dynamics.kind = DynamicsModel::Kind::kControlAffine;
    pf.dynamics.builtin = ca->name;
    pf.dynamics.parameters = ca->parameters;
  } else {
    throw Error(ErrorCode::kContract, "only LTI and catalog control-affine dynamics serialize");
  }
  if (const auto* q = spec.cost.quadratic()) {
    pf.cost.Q = q->Q;
    pf.cost.R = q->R;
  } else {
    throw Error(ErrorCode::kContract, "only quadratic costs serialize");
  }
  pf.state_sets = spec.state_sets;
  pf.control_sets = spec.control_sets;
  pf.banned = spec.supports.banned_sets();
  if (spec.supports.empty()) pf.banned.clear();
  pf.solver = solver;
  pf.options = options;
  return pf;
}

/// JSON pointer of a validation issue, e.g. "/cost/R" or "/state_sets/3".
inline std::string issue_path(const ValidationIssue& issue) {
  std::string path = "/" + issue.field;
  std::replace(path.begin(), path.end(), '.', '/');
  if (issue.stage >= 0) path += "/" + std::to_string(issue.stage);
  return path;
}

/// Parses and validates a problem document.
inline ProblemSpec load_spec(const ProblemFile& pf) {
  const auto result = validate(to_spec(pf));
  if (!result.ok()) {
    std::vector<FileIssue> issues;
    for (const auto& i : result.issues) {
      std::string message = i.message;
      if (i.stage >= 0) message = "stage " + std::to_string(i.stage) + ", " + message;
      issues.push_back({issue_path(i), 0, message});
    }
    throw ProblemFileError(std::move(issues));
  }
  return *result.spec;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace pmpfreq::io
