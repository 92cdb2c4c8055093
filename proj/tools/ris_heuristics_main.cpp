// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// ris-heuristics <command> [--config FILE] [--seed U64] [--runs N] [--jobs N]
//                [--out DIR] [--elements N[,N..]] [--rho R[,R..]] [--algos LIST]
//
// Exit codes: 0 success, 2 usage or unknown command, 3 invalid configuration,
// 4 output not writable, 1 anything else.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "ris/experiment.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitOutput = 4;

std::string command_help() {
  std::string s = "one of:";
  for (const auto& c : ris::known_commands()) s += " " + c;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heuristic and heuristic-aided learning optimizers for RIS phase configuration"};
  std::string command;
  std::string config_file;
  // Kept as strings so values go through the same strict parser as the config file.
  std::vector<std::pair<std::string, std::optional<std::string>>> flags{
      {"seed", {}}, {"runs", {}}, {"jobs", {}}, {"out", {}}, {"elements", {}}, {"rho", {}}, {"algos", {}},
      {"iterations", {}}};
  app.add_option("command", command, command_help())->required();
  app.add_option("--config", config_file, "flat key=value file; flags override it");
  for (auto& [key, value] : flags) app.add_option("--" + key, value);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    ris::ExperimentConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    cfg.command = command;
    for (const auto& [key, value] : flags)
      if (value) cfg.set(key, *value);
    cfg.validate();
    run_experiment(cfg);
    if (command == "matching-demo") {
      std::ifstream audit(cfg.out / "curves" / "matching_audit.csv");
      std::cout << audit.rdbuf();
    }
    std::cout << "wrote " << (cfg.out / "summary.json").string() << '\n';
    return 0;
  } catch (const ris::UnknownCommandError& e) {
    std::cerr << "error: " << e.what() << "\n" << command_help() << '\n';
    return kExitUsage;
  } catch (const ris::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ris::OutputError& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return kExitOutput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
