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

// Experiment harness: seeded replications of the optimizers, summary
// statistics, and the CSV / JSON files written by the command-line tool.

#ifndef RIS_EXPERIMENT_HPP
#define RIS_EXPERIMENT_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ris/drl.hpp"
#include "ris/sysmodel.hpp"

namespace ris {

inline constexpr const char* kArtifactVersion = "1.0.0";

/// Bad configuration key or value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Output directory or file could not be written.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown command name.
class UnknownCommandError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

const std::vector<std::string>& known_commands();
const std::vector<std::string>& known_algorithms();

struct ExperimentConfig {
  std::string command;
  SystemConfig system;                // n_elements is taken from `elements`
  std::vector<std::string> algos;     // empty: command default
  std::vector<std::size_t> elements;  // empty: command default
  std::vector<double> rho;            // empty: command default
  std::size_t iterations = 8000;
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::filesystem::path out = "results";
  std::size_t restarts = 50;              // greedy pre-runs for heuristic-drl
  std::size_t rows = 5000;                // supervised
  std::string labeler = "greedy";         // supervised
  std::optional<double> power_weight;     // hierarchical; unset: calibrate
  std::size_t horizon = 300;              // hierarchical
  std::size_t delta_steps = 10;           // hierarchical
  std::size_t samples = 100000;           // channel-stats

  /// Applies one key=value override. Throws ConfigError.
  void set(const std::string& key, const std::string& value);
  /// Parses a flat key=value file ('#' comments, blank lines ignored).
  void load_file(const std::filesystem::path& path);
  /// Effective settings (command defaults resolved) as sorted key=value lines.
  std::string echo() const;
  /// Throws ConfigError / UnknownCommandError.
  void validate() const;

  std::vector<std::string> resolved_algos() const;
  std::vector<std::size_t> resolved_elements() const;
  std::vector<double> resolved_rho() const;
  SystemConfig system_for(std::size_t n_elements) const;
};

struct RunOptions {
  std::size_t iterations = 8000;
  double rho = 0.7;
  std::size_t restarts = 50;
  DqnConfig dqn;
  bool keep_log = false;
};

struct AlgoRun {
  std::string algo;
  std::size_t elements = 0;
  std::size_t run = 0;
  std::uint64_t seed = 0;
  double sum_rate = 0.0;  // final (or best, for search methods) sum-rate
  double wall_seconds = 0.0;
  double pre_run_seconds = 0.0;  // heuristic-drl greedy pre-runs
  std::size_t evaluations = 0;
  std::size_t action_count = 0;  // learning methods
  double achieved_rho = 0.0;
  std::vector<double> reward;  // sum-rate of the action taken per iteration, when keep_log
};

/// Channel for replication seed `seed`: sample_channels(cfg, derive_rng(seed, "channel")).
ChannelRealization experiment_channel(const SystemConfig& cfg, std::uint64_t seed);

/// One algorithm on one seeded channel. Wall-clock covers the algorithm call
/// only. "random" reports the mean sum-rate of `iterations` uniformly drawn
/// configurations. Throws ConfigError for an unknown algorithm.
AlgoRun run_algorithm(const std::string& algo, const SystemConfig& cfg, std::uint64_t seed, const RunOptions& options);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
/// exception after all threads finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct Stats {
  std::size_t n = 0;
  double mean = 0.0;
  double stdev = 0.0;  // sample (n - 1); 0 when n < 2
};
Stats summarize(const std::vector<double>& values);

/// Trailing moving average; the first window-1 entries average what exists.
std::vector<double> trailing_average(const std::vector<double>& x, std::size_t window);
/// Mean of the last `last` entries (all, if fewer).
double plateau(const std::vector<double>& x, std::size_t last = 1000);
/// First 1-based iteration (>= window) at which the full trailing window
/// average reaches fraction * plateau, or x.size() + 1 if it never does.
std::size_t iterations_to_fraction(const std::vector<double>& reward, double fraction = 0.9,
                                   std::size_t window = 100, std::size_t last = 1000);

/// Runs `cfg.command` and writes curves/*.csv, summary.json and config.echo
/// under cfg.out. Returns the summary document as JSON text.
std::string run_experiment(const ExperimentConfig& cfg);

/// Reads a CSV written by the harness (header row, numeric cells).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace ris

#endif  // RIS_EXPERIMENT_HPP
