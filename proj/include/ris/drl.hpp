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

// Deep Q-learning over a discrete set of joint phase configurations. The
// channel is fixed for a run and every step is a terminal one-step episode.

#ifndef RIS_DRL_HPP
#define RIS_DRL_HPP

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "ris/nn.hpp"
#include "ris/sysmodel.hpp"

namespace ris {

struct StepResult {
  std::vector<double> next_state;
  double reward = 0.0;
  double value = 0.0;  // raw objective behind the reward
  bool terminal = true;
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t state_size() const = 0;
  virtual std::vector<double> reset() = 0;
  virtual StepResult step(std::size_t action) = 0;
  /// Objective value of an action without side effects (for reporting).
  virtual double value(std::size_t action) const = 0;
};

/// Actions are joint phase configurations. State: standardised channel
/// features followed by a one-hot of the previous action (all zeros before
/// the first step). Reward: sum-rate divided by the running maximum.
class PhaseEnv final : public Environment {
 public:
  PhaseEnv(const ChannelRealization& real, const SystemConfig& cfg, std::vector<PhaseConfig> action_set);
  /// Full L^G action set in lexicographic order.
  PhaseEnv(const ChannelRealization& real, const SystemConfig& cfg);

  std::size_t num_actions() const override { return actions_.size(); }
  std::size_t state_size() const override { return features_.size() + actions_.size(); }
  std::vector<double> reset() override;
  StepResult step(std::size_t action) override;
  double value(std::size_t action) const override;

  const PhaseConfig& config(std::size_t action) const { return actions_.at(action); }
  const std::vector<PhaseConfig>& action_set() const { return actions_; }
  double reward_scale() const { return running_max_; }
  std::size_t evaluations() const { return evaluations_; }

 private:
  std::vector<double> state_after(std::optional<std::size_t> previous) const;

  SumRateObjective objective_;
  std::vector<PhaseConfig> actions_;
  std::vector<double> features_;
  double running_max_ = 0.0;
  std::size_t evaluations_ = 0;
};

/// channel_features with the magnitudes (even entries) and the phases (odd
/// entries) each standardised to zero mean and unit variance.
std::vector<double> standardized_features(const ChannelRealization& real, const SystemConfig& cfg);

struct DqnConfig {
  std::vector<std::size_t> hidden{64, 64};
  double gamma = 0.9;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::size_t epsilon_decay_steps = 4000;
  std::size_t buffer_capacity = 5000;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::size_t target_sync_period = 100;  // in updates
  std::size_t learn_start = 32;          // minimum stored transitions
  double huber_delta = 1.0;

  void validate() const;
};

class DqnAgent {
 public:
  DqnAgent(std::size_t state_size, std::size_t num_actions, DqnConfig cfg, Rng& rng);

  double epsilon(std::size_t step) const;
  std::size_t greedy_action(const std::vector<double>& state) const;
  Eigen::VectorXd q_values(const std::vector<double>& state) const;

  void observe(Transition t) { buffer_.push(std::move(t)); }
  /// One TD step on a sampled batch; nullopt (no learning) while the buffer
  /// holds fewer than learn_start transitions.
  std::optional<double> update(Rng& rng);
  void sync_target() { target_ = online_; }

  const Mlp& online() const { return online_; }
  Mlp& online() { return online_; }
  const Mlp& target() const { return target_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const DqnConfig& config() const { return cfg_; }
  std::size_t updates() const { return updates_; }

 private:
  DqnConfig cfg_;
  std::size_t num_actions_;
  Mlp online_;
  Mlp target_;
  AdamState adam_;
  ReplayBuffer buffer_;
  std::size_t updates_ = 0;
};

struct TrainLog {
  std::vector<double> reward;       // normalised reward at each iteration
  std::vector<double> epsilon;
  std::vector<double> best_so_far;  // running max of the raw objective
  std::vector<double> raw_value;    // raw objective of the action taken
  std::vector<bool> explored;       // exploration branch taken
  double wall_seconds = 0.0;
  std::size_t final_action = 0;
  double final_value = 0.0;  // objective of the final greedy action

  std::size_t size() const { return reward.size(); }
  /// Columns: iteration, reward, best_so_far, epsilon.
  void write_csv(const std::filesystem::path& path) const;
};

/// Replaces uniform exploration: given the current greedy action, return the
/// action to try.
using ExploreFn = std::function<std::size_t(std::size_t greedy_action, Rng& rng)>;

TrainLog dqn_train(Environment& env, DqnAgent& agent, std::size_t iterations, Rng& rng,
                   const ExploreFn& explore = {});
/// Builds the agent from `cfg` with weights drawn from `rng`.
TrainLog dqn_train(Environment& env, const DqnConfig& cfg, std::size_t iterations, Rng& rng,
                   const ExploreFn& explore = {});

}  // namespace ris

#endif  // RIS_DRL_HPP
