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

// Two-timescale control: a tabular Q-learning meta-controller picks the BS
// transmit power level once per block of sub-steps, and a greedy
// sub-controller picks RIS phases on every (freshly drawn) sub-step channel.

#ifndef RIS_HIERARCHICAL_HPP
#define RIS_HIERARCHICAL_HPP

#include <filesystem>
#include <vector>

#include "ris/sysmodel.hpp"

namespace ris {

struct HierarchicalConfig {
  std::size_t delta_steps = 10;  // sub-steps per meta decision
  std::size_t horizon = 300;     // meta decisions
  std::vector<double> power_levels_dbm{24.0, 30.0, 36.0};
  double power_weight = 0.0;  // beta, bits/s/Hz per watt
  std::size_t sub_sweeps = 1;  // greedy passes per sub-step
  std::size_t rate_buckets = 10;
  double learning_rate = 0.1;
  bool decay_learning_rate = true;  // lr = 1 / visits(s, a)
  double gamma = 0.5;
  double epsilon = 0.1;

  void validate() const;
};

/// Tabular Q over states (rate bucket, current level) and actions (level).
struct MetaAgent {
  std::size_t buckets = 0;
  std::size_t levels = 0;
  std::vector<std::vector<double>> q;         // [state][action]
  std::vector<std::vector<std::size_t>> visits;
  double learning_rate = 0.1;
  bool decay_learning_rate = false;
  double gamma = 0.5;
  double epsilon = 0.1;

  MetaAgent() = default;
  MetaAgent(std::size_t buckets, std::size_t levels, double learning_rate, bool decay, double gamma,
            double epsilon);

  std::size_t states() const { return q.size(); }
  std::size_t state_index(std::size_t bucket, std::size_t level) const { return bucket * levels + level; }
  std::size_t greedy(std::size_t state) const;  // first max
  std::size_t act(std::size_t state, Rng& rng) const;
  /// Action with the highest visit-weighted mean Q over the states where it
  /// was taken. Untried actions are skipped, since their zero entries say
  /// nothing. Falls back to 0 on an empty table.
  std::size_t policy() const;
};

/// Q(s,a) += lr (r + gamma max_a' Q(s',a') - Q(s,a)), lr = 1/visits(s,a)
/// when decaying. Throws std::out_of_range for a bad index.
void meta_q_update(MetaAgent& agent, std::size_t state, std::size_t action, double reward,
                   std::size_t next_state);

/// Equal-width buckets over [lo, hi]; values outside are clamped.
struct RateBuckets {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t count = 10;
  std::size_t bucket(double rate) const;
};

struct MetaStep {
  std::size_t level = 0;
  double power_dbm = 0.0;
  double mean_rate = 0.0;
  double reward = 0.0;
  bool explored = false;
};

struct HierarchicalLog {
  RateBuckets buckets;
  std::vector<MetaStep> steps;  // length horizon
  MetaAgent agent;
  std::size_t policy_level = 0;
  std::size_t evaluations_per_substep = 0;

  /// meta_step,level,power_dbm,mean_rate,reward,explored
  void write_csv(const std::filesystem::path& path) const;
};

double dbm_to_watts(double dbm);

/// Mean sum-rate over `steps` sub-steps at one power level: each sub-step
/// draws a channel from `channel_rng` and runs the greedy sub-controller.
double sub_controller_block(const SystemConfig& cfg, double power_dbm, std::size_t steps, std::size_t sweeps,
                            Rng& channel_rng, std::size_t* evaluations = nullptr);

/// Calibration (one block per level sets the bucket range over observed
/// sub-step rates), then `horizon` meta steps of epsilon-greedy selection
/// and Q updates. Channels and the agent use separate streams split off
/// `rng`.
HierarchicalLog hierarchical_run(const SystemConfig& cfg, const HierarchicalConfig& hcfg, Rng& rng);

/// Monte-Carlo mean sub-step sum-rate per power level (`blocks` blocks of
/// `delta_steps` each).
std::vector<double> mean_rate_per_level(const SystemConfig& cfg, const HierarchicalConfig& hcfg,
                                        std::size_t blocks, Rng& rng);

/// beta making the two extreme levels tie: (R_last - R_first) / (P_last - P_first) in watts.
double calibrate_power_weight(const std::vector<double>& mean_rates, const std::vector<double>& power_levels_dbm);

}  // namespace ris

#endif  // RIS_HIERARCHICAL_HPP
