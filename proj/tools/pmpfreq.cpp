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

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmpfreq/io/result_file.hpp"
#include "pmpfreq/io/run.hpp"
#include "pmpfreq/version.hpp"

namespace {

int spectrum_command(const std::string& result_path, const std::string& output_path) {
  using namespace pmpfreq;
  try {
    const auto doc = io::parse_json_text(io::read_text_file(result_path));
    const std::string csv = io::spectrum_csv(io::spectrum_report(doc));
    if (output_path.empty() || output_path == "-") {
      std::cout << csv;
      return 0;
    }
    std::ofstream f(output_path, std::ios::binary);
    if (!f) {
      std::cerr << "cannot write " << output_path << '\n';
      return 1;
    }
    f << csv;
    return 0;
  } catch (const io::ProblemFileError& e) {
    for (const auto& i : e.issues()) std::cerr << result_path << ": " << i.to_string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << result_path << ": " << e.what() << '\n';
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discrete-time optimal control with banned control frequencies"};
  app.set_version_flag("--version", std::string(pmpfreq::kVersion));

  std::string input;
  std::string output = "-";
  std::string solver;
  std::optional<double> tolerance;
  std::vector<std::string> overrides;
  bool quiet = false;
  app.add_option("-i,--input", input, "problem file (JSON)");
  app.add_option("-o,--output", output, "result file, - for stdout")->capture_default_str();
  app.add_option("-s,--solver", solver, "riccati | lq_pmp | transfer | transfer_freq | shooting");
  app.add_option("--tolerance", tolerance, "certificate tolerance");
  app.add_option("--set", overrides, "override a field, e.g. --set horizon=8")->take_all();
  app.add_flag("-q,--quiet", quiet, "no summary line");

  std::string result_path;
  std::string csv_path = "-";
  auto* spectrum = app.add_subcommand("spectrum", "per-channel DFT table of a result file");
  spectrum->add_option("-r,--result", result_path, "result file")->required();
  spectrum->add_option("-o,--output", csv_path, "CSV file, - for stdout")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (*spectrum) return spectrum_command(result_path, csv_path);
  if (input.empty()) {
    std::cerr << "--input is required\n" << app.help();
    return 1;
  }
  pmpfreq::io::RunOptions opts;
  opts.overrides = overrides;
  if (!solver.empty()) opts.solver = solver;
  opts.tolerance = tolerance;
  opts.quiet = quiet;
  return pmpfreq::io::run(input, output, opts, std::cout, std::cerr);
}
