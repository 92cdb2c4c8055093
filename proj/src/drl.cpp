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

#include "ris/drl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

namespace ris {

namespace {

// Z-scores v[first], v[first + 2], ...
void standardize_strided(std::vector<double>& v, std::size_t first) {
  const double n = static_cast<double>((v.size() - first + 1) / 2);
  double mean = 0.0;
  for (std::size_t i = first; i < v.size(); i += 2) mean += v[i];
  mean /= n;
  double var = 0.0;
  for (std::size_t i = first; i < v.size(); i += 2) var += (v[i] - mean) * (v[i] - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = first; i < v.size(); i += 2) v[i] = sd > 0.0 ? (v[i] - mean) / sd : 0.0;
}

std::vector<PhaseConfig> full_action_set(const SystemConfig& cfg) {
  const std::uint64_t n = space_size(cfg.groups(), cfg.levels());
  if (n > 1'000'000) throw SpaceTooLargeError("PhaseEnv: full action set too large");
  std::vector<PhaseConfig> out;
  out.reserve(n);
  for (std::uint64_t r = 0; r < n; ++r) out.push_back(config_from_rank(r, cfg.groups(), cfg.levels()));
  return out;
}

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::vector<double> standardized_features(const ChannelRealization& real, const SystemConfig& cfg) {
  std::vector<double> f = channel_features(real, cfg);
  standardize_strided(f, 0);  // magnitudes
  standardize_strided(f, 1);  // phases
  return f;
}

// ---------------------------------------------------------------- PhaseEnv

PhaseEnv::PhaseEnv(const ChannelRealization& real, const SystemConfig& cfg, std::vector<PhaseConfig> action_set)
    : objective_(real, cfg), actions_(std::move(action_set)), features_(standardized_features(real, cfg)) {
  if (actions_.empty()) throw std::invalid_argument("PhaseEnv: empty action set");
  std::set<PhaseConfig> seen;
  for (const auto& a : actions_) {
    if (a.size() != cfg.groups()) throw DimensionError("PhaseEnv: action length != group count");
    for (int q : a.indices)
      if (q < 0 || q >= cfg.levels()) throw std::invalid_argument("PhaseEnv: phase index out of range");
    if (!seen.insert(a).second) throw std::invalid_argument("PhaseEnv: duplicate action " + to_string(a));
  }
}

PhaseEnv::PhaseEnv(const ChannelRealization& real, const SystemConfig& cfg)
    : PhaseEnv(real, cfg, full_action_set(cfg)) {}

std::vector<double> PhaseEnv::state_after(std::optional<std::size_t> previous) const {
  std::vector<double> s(state_size(), 0.0);
  std::copy(features_.begin(), features_.end(), s.begin());
  if (previous) s[features_.size() + *previous] = 1.0;
  return s;
}

std::vector<double> PhaseEnv::reset() { return state_after(std::nullopt); }

StepResult PhaseEnv::step(std::size_t action) {
  if (action >= actions_.size())
    throw std::out_of_range("PhaseEnv::step: action " + std::to_string(action) + " out of range");
  const double v = objective_(actions_[action]);
  ++evaluations_;
  running_max_ = std::max(running_max_, v);
  StepResult r;
  r.next_state = state_after(action);
  r.reward = running_max_ > 0.0 ? v / running_max_ : 0.0;
  r.value = v;
  r.terminal = true;
  return r;
}

double PhaseEnv::value(std::size_t action) const { return objective_.rates(actions_.at(action)).sum_rate; }

// ---------------------------------------------------------------- agent

void DqnConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("DqnConfig: gamma must be in [0, 1]");
  if (!(epsilon_end >= 0.0 && epsilon_end <= epsilon_start && epsilon_start <= 1.0))
    throw std::invalid_argument("DqnConfig: need 0 <= epsilon_end <= epsilon_start <= 1");
  if (batch_size == 0 || buffer_capacity < batch_size)
    throw std::invalid_argument("DqnConfig: need 1 <= batch_size <= buffer_capacity");
  if (learn_start < batch_size) throw std::invalid_argument("DqnConfig: learn_start must be >= batch_size");
  if (target_sync_period == 0) throw std::invalid_argument("DqnConfig: target_sync_period must be >= 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("DqnConfig: learning_rate must be > 0");
}

namespace {

std::vector<std::size_t> net_sizes(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

}  // namespace

DqnAgent::DqnAgent(std::size_t state_size, std::size_t num_actions, DqnConfig cfg, Rng& rng)
    : cfg_((cfg.validate(), std::move(cfg))),
      num_actions_(num_actions),
      online_(net_sizes(state_size, cfg_.hidden, num_actions), rng),
      target_(online_),
      adam_(online_, AdamConfig{cfg_.learning_rate}),
      buffer_(cfg_.buffer_capacity) {}

double DqnAgent::epsilon(std::size_t step) const {
  if (cfg_.epsilon_decay_steps == 0 || step >= cfg_.epsilon_decay_steps) return cfg_.epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(cfg_.epsilon_decay_steps);
  return cfg_.epsilon_start + frac * (cfg_.epsilon_end - cfg_.epsilon_start);
}

Eigen::VectorXd DqnAgent::q_values(const std::vector<double>& state) const {
  return online_.forward(to_eigen(state));
}

std::size_t DqnAgent::greedy_action(const std::vector<double>& state) const {
  const Eigen::VectorXd q = q_values(state);
  Eigen::Index best = 0;
  q.maxCoeff(&best);  // first maximum on ties
  return static_cast<std::size_t>(best);
}

std::optional<double> DqnAgent::update(Rng& rng) {
  if (buffer_.size() < cfg_.learn_start) return std::nullopt;
  const auto batch = buffer_.sample(cfg_.batch_size, rng);
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto S = static_cast<Eigen::Index>(online_.input_size());

  Eigen::MatrixXd states(S, B);
  bool any_continuing = false;
  for (Eigen::Index b = 0; b < B; ++b) {
    states.col(b) = to_eigen(batch[static_cast<std::size_t>(b)]->state);
    any_continuing = any_continuing || !batch[static_cast<std::size_t>(b)]->terminal;
  }
  Eigen::VectorXd bootstrap = Eigen::VectorXd::Zero(B);
  if (any_continuing && cfg_.gamma > 0.0) {
    Eigen::MatrixXd next(S, B);
    for (Eigen::Index b = 0; b < B; ++b) next.col(b) = to_eigen(batch[static_cast<std::size_t>(b)]->next_state);
    const Eigen::MatrixXd q_next = target_.forward_batch(next);
    for (Eigen::Index b = 0; b < B; ++b)
      if (!batch[static_cast<std::size_t>(b)]->terminal) bootstrap(b) = cfg_.gamma * q_next.col(b).maxCoeff();
  }

  Mlp::Cache cache;
  const Eigen::MatrixXd q = online_.forward_batch(states, cache);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(q.rows(), B);
  double loss = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const Transition& t = *batch[static_cast<std::size_t>(b)];
    const auto a = static_cast<Eigen::Index>(t.action);
    const double err = q(a, b) - (t.reward + bootstrap(b));
    loss += huber_loss(err, cfg_.huber_delta);
    grad(a, b) = huber_gradient(err, cfg_.huber_delta) / static_cast<double>(B);
  }
  adam_step(online_, online_.backward(cache, grad), adam_);
  ++updates_;
  if (updates_ % cfg_.target_sync_period == 0) sync_target();
  return loss / static_cast<double>(B);
}

// ---------------------------------------------------------------- training

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("TrainLog: cannot write " + path.string());
  out.precision(17);
  out << "iteration,reward,best_so_far,epsilon\n";
  for (std::size_t i = 0; i < reward.size(); ++i)
    out << i + 1 << ',' << reward[i] << ',' << best_so_far[i] << ',' << epsilon[i] << '\n';
}

TrainLog dqn_train(Environment& env, DqnAgent& agent, std::size_t iterations, Rng& rng, const ExploreFn& explore) {
  if (iterations == 0) throw std::invalid_argument("dqn_train: iterations must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> uniform_action(0, env.num_actions() - 1);

  TrainLog log;
  log.reward.reserve(iterations);
  log.epsilon.reserve(iterations);
  log.best_so_far.reserve(iterations);
  log.raw_value.reserve(iterations);

  std::vector<double> state = env.reset();
  double best = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const double eps = agent.epsilon(it);
    std::size_t action;
    const bool exploring = coin(rng) < eps;
    if (exploring) {
      action = explore ? explore(agent.greedy_action(state), rng) : uniform_action(rng);
    } else {
      action = agent.greedy_action(state);
    }
    StepResult step = env.step(action);
    const double raw = step.value;
    best = it == 0 ? raw : std::max(best, raw);

    log.reward.push_back(step.reward);
    log.epsilon.push_back(eps);
    log.best_so_far.push_back(best);
    log.raw_value.push_back(raw);
    log.explored.push_back(exploring);

    agent.observe(Transition{state, action, step.reward, step.next_state, step.terminal});
    agent.update(rng);
    state = std::move(step.next_state);
  }
  log.final_action = agent.greedy_action(state);
  log.final_value = env.value(log.final_action);
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

TrainLog dqn_train(Environment& env, const DqnConfig& cfg, std::size_t iterations, Rng& rng,
                   const ExploreFn& explore) {
  DqnAgent agent(env.state_size(), env.num_actions(), cfg, rng);
  return dqn_train(env, agent, iterations, rng, explore);
}

}  // namespace ris
