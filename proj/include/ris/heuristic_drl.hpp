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

// Greedy-guided action pruning for DQN: tally the phases chosen by randomised
// greedy restarts, keep the most frequent phases per group, and train the
// Q-network over the resulting cross-product only.

#ifndef RIS_HEURISTIC_DRL_HPP
#define RIS_HEURISTIC_DRL_HPP

#include <optional>
#include <string>
#include <vector>

#include "ris/drl.hpp"
#include "ris/search.hpp"

namespace ris {

/// Outcome of the greedy pre-runs.
struct GreedyTally {
  int levels = 0;
  std::size_t restarts = 0;
  /// frequency[g][q]: restarts whose (rotation-aligned) final config has
  /// phase q in group g.
  std::vector<std::vector<std::size_t>> frequency;
  PhaseConfig best_config;
  double best_value = 0.0;
  std::size_t evaluations = 0;
};

/// Runs element-wise greedy `restarts` times from random inits with random
/// group orders. A common phase rotation does not change the objective, so
/// each final config is rotated to the offset closest (in Hamming distance)
/// to the best config before tallying.
GreedyTally greedy_tally(SumRateObjective& objective, std::size_t restarts, Rng& rng);

struct ReducedActionSet {
  int levels = 0;
  double target_rho = 0.0;
  std::vector<std::vector<int>> allowed;  // per group, ascending
  std::vector<std::vector<std::size_t>> frequency;
  PhaseConfig best_greedy;
  double best_greedy_value = 0.0;
  std::size_t pre_run_evaluations = 0;

  std::size_t groups() const { return allowed.size(); }
  std::size_t joint_size() const;
  /// 1 - joint_size / L^G.
  double reduction_ratio() const;
  /// Cross-product in lexicographic order of the ascending subsets. With
  /// every phase allowed this is the full enumeration order.
  std::vector<PhaseConfig> joint() const;
  std::optional<std::size_t> index_of(const PhaseConfig& cfg) const;
  bool contains(const PhaseConfig& cfg) const { return index_of(cfg).has_value(); }
  /// Frequency table, subsets, target and achieved ratio.
  std::string to_json() const;
};

/// Subset selection from a tally. Each group starts with its most frequent
/// phase. Then the next most frequent phase of some group is added, one at a
/// time: highest count first, ties to the expansion giving the smaller joint
/// size, then to the lower group index. Growth stops once the joint size
/// reaches ceil((1 - target_rho) L^G). The expansion order does not depend on
/// the target, so smaller targets give nested sets. Finally the best greedy
/// config's phases are inserted.
ReducedActionSet select_reduced_set(const GreedyTally& tally, double target_rho);

ReducedActionSet reduce_action_space(const ChannelRealization& real, const SystemConfig& cfg, double target_rho,
                                     std::size_t restarts, Rng& rng);

/// One neighborhood scan inside the reduced subsets, starting from the
/// greedy action; returns the best strictly improving neighbor or the start.
class HeuristicExplorer {
 public:
  HeuristicExplorer(const ReducedActionSet& reduced, const ChannelRealization& real, const SystemConfig& cfg);
  std::size_t operator()(std::size_t greedy_action, Rng& rng);
  std::size_t evaluations() const { return objective_.evaluations(); }

 private:
  const ReducedActionSet* reduced_;
  std::vector<PhaseConfig> joint_;
  SumRateObjective objective_;
};

struct HeuristicDrlConfig {
  double target_rho = 0.7;
  std::size_t restarts = 50;
  bool heuristic_exploration = false;
  DqnConfig dqn;
};

struct HeuristicDrlRun {
  ReducedActionSet reduced;
  TrainLog log;
  PhaseConfig final_config;
  double pre_run_seconds = 0.0;
  double total_seconds = 0.0;  // pre-runs plus training
};

/// Greedy pre-runs, reduction, then DQN over the reduced joint list.
HeuristicDrlRun heuristic_drl_run(const ChannelRealization& real, const SystemConfig& cfg,
                                  const HeuristicDrlConfig& hcfg, std::size_t iterations, Rng& rng);

/// DQN over a given reduced set (the environment's action list is its
/// joint list).
TrainLog heuristic_dqn_train(const ChannelRealization& real, const SystemConfig& cfg,
                             const ReducedActionSet& reduced, const DqnConfig& dcfg, std::size_t iterations,
                             Rng& rng, bool heuristic_exploration = false);

}  // namespace ris

#endif  // RIS_HEURISTIC_DRL_HPP
