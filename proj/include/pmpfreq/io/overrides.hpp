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

// "--set key=value" edits of a problem document before it is read.
// Keys are dotted paths ("options.max_iterations", "boundary.xf.0");
// numeric segments index lists. Values are JSON when they parse as JSON
// ("8", "[1, 2]", "true") and plain strings otherwise ("free").

#pragma once

#include <string>
#include <vector>

#include "pmpfreq/io/problem_file.hpp"

namespace pmpfreq::io {

inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ProblemFileError({{"", 0, "override \"" + assignment + "\" is not key=value"}});
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);

  Json value;
  try {
    value = Json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }

  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    parts.push_back(key.substr(start, dot - start));
    if (dot == std::string::npos) break;
    start = dot + 1;
  }

  Json* node = &doc;
  std::string path;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto& part = parts[i];
    path += "/" + part;
    if (part.empty())
      throw ProblemFileError({{path, 0, "empty path segment in override \"" + key + "\""}});
    const bool last = i + 1 == parts.size();
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(part, &used);
        if (used != part.size()) throw std::invalid_argument(part);
      } catch (const std::exception&) {
        throw ProblemFileError({{path, 0, "list index expected in override"}});
      }
      if (idx >= node->size())
        throw ProblemFileError({{path, 0, "index out of range in override"}});
      node = &(*node)[idx];
    } else {
      if (node->is_null()) *node = Json::object();
      if (!node->is_object())
        throw ProblemFileError({{path, 0, "cannot descend into a scalar in override"}});
      node = &(*node)[part];
    }
    if (last) *node = value;
  }
}

inline void apply_overrides(Json& doc, const std::vector<std::string>& assignments) {
  for (const auto& a : assignments) apply_override(doc, a);
}

}  // namespace pmpfreq::io
