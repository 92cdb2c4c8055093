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

#include "ris/hierarchical.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "ris/search.hpp"

namespace ris {

void HierarchicalConfig::validate() const {
  if (delta_steps == 0) throw std::invalid_argument("HierarchicalConfig: delta_steps must be >= 1");
  if (horizon == 0) throw std::invalid_argument("HierarchicalConfig: horizon must be >= 1");
  if (power_levels_dbm.empty()) throw std::invalid_argument("HierarchicalConfig: no power levels");
  if (!(power_weight >= 0.0)) throw std::invalid_argument("HierarchicalConfig: power_weight must be >= 0");
  if (sub_sweeps == 0) throw std::invalid_argument("HierarchicalConfig: sub_sweeps must be >= 1");
  if (rate_buckets == 0) throw std::invalid_argument("HierarchicalConfig: rate_buckets must be >= 1");
  if (!(learning_rate >= 0.0 && learning_rate <= 1.0))
    throw std::invalid_argument("HierarchicalConfig: learning_rate must be in [0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("HierarchicalConfig: gamma must be in [0, 1)");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("HierarchicalConfig: epsilon must be in [0, 1]");
}

MetaAgent::MetaAgent(std::size_t buckets_, std::size_t levels_, double lr, bool decay, double gamma_,
                     double epsilon_)
    : buckets(buckets_),
      levels(levels_),
      q(buckets_ * levels_, std::vector<double>(levels_, 0.0)),
      visits(buckets_ * levels_, std::vector<std::size_t>(levels_, 0)),
      learning_rate(lr),
      decay_learning_rate(decay),
      gamma(gamma_),
      epsilon(epsilon_) {
  if (buckets == 0 || levels == 0) throw std::invalid_argument("MetaAgent: empty table");
}

std::size_t MetaAgent::greedy(std::size_t state) const {
  const auto& row = q.at(state);
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

std::size_t MetaAgent::act(std::size_t state, Rng& rng) const {
  if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon)
    return std::uniform_int_distribution<std::size_t>(0, levels - 1)(rng);
  return greedy(state);
}

std::size_t MetaAgent::policy() const {
  std::vector<double> sum(levels, 0.0);
  std::vector<std::size_t> n(levels, 0);
  for (std::size_t s = 0; s < states(); ++s)
    for (std::size_t a = 0; a < levels; ++a) {
      sum[a] += static_cast<double>(visits[s][a]) * q[s][a];
      n[a] += visits[s][a];
    }
  std::size_t best = levels;
  double best_score = 0.0;
  for (std::size_t a = 0; a < levels; ++a) {
    if (n[a] == 0) continue;
    const double score = sum[a] / static_cast<double>(n[a]);
    if (best == levels || score > best_score) {
      best = a;
      best_score = score;
    }
  }
  return best == levels ? 0 : best;
}

void meta_q_update(MetaAgent& agent, std::size_t state, std::size_t action, double reward, std::size_t next_state) {
  if (state >= agent.states() || next_state >= agent.states() || action >= agent.levels)
    throw std::out_of_range("meta_q_update: index out of range");
  const auto& next = agent.q[next_state];
  const double target = reward + agent.gamma * *std::max_element(next.begin(), next.end());
  const std::size_t k = ++agent.visits[state][action];
  const double lr = agent.decay_learning_rate ? 1.0 / static_cast<double>(k) : agent.learning_rate;
  agent.q[state][action] += lr * (target - agent.q[state][action]);
}

std::size_t RateBuckets::bucket(double rate) const {
  if (!(hi > lo)) return 0;
  const double t = (rate - lo) / (hi - lo) * static_cast<double>(count);
  if (!(t > 0.0)) return 0;
  return std::min(count - 1, static_cast<std::size_t>(t));
}

double dbm_to_watts(double dbm) { return std::pow(10.0, dbm / 10.0) / 1000.0; }

namespace {

// Sum-rates of `steps` sub-steps; each costs exactly G*L*sweeps evaluations.
std::vector<double> sub_step_rates(const SystemConfig& cfg, double power_dbm, std::size_t steps, std::size_t sweeps,
                                   Rng& channel_rng, std::size_t* evaluations) {
  SystemConfig c = cfg;
  c.tx_power_dbm = power_dbm;
  const auto order = identity_order(c.groups());
  std::vector<double> rates;
  rates.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const ChannelRealization real = sample_channels(c, channel_rng);
    SumRateObjective obj(real, c);
    PhaseConfig phase(c.groups(), 0);
    double value = 0.0;
    // Single passes back to back, so a converged pass does not end early.
    for (std::size_t s = 0; s < sweeps; ++s) {
      const SearchResult r = greedy_elementwise(obj, phase, order, 1);
      phase = r.best_config;
      value = r.best_value;
    }
    if (evaluations) *evaluations = obj.evaluations();
    rates.push_back(value);
  }
  return rates;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double sub_controller_block(const SystemConfig& cfg, double power_dbm, std::size_t steps, std::size_t sweeps,
                            Rng& channel_rng, std::size_t* evaluations) {
  return mean(sub_step_rates(cfg, power_dbm, steps, sweeps, channel_rng, evaluations));
}

HierarchicalLog hierarchical_run(const SystemConfig& cfg, const HierarchicalConfig& hcfg, Rng& rng) {
  cfg.validate();
  hcfg.validate();
  Rng channel_rng(rng());
  Rng agent_rng(rng());
  const std::size_t P = hcfg.power_levels_dbm.size();

  HierarchicalLog log;
  log.buckets.count = hcfg.rate_buckets;
  log.buckets.lo = std::numeric_limits<double>::infinity();
  log.buckets.hi = -std::numeric_limits<double>::infinity();
  for (double p : hcfg.power_levels_dbm) {
    for (double r : sub_step_rates(cfg, p, hcfg.delta_steps, hcfg.sub_sweeps, channel_rng, nullptr)) {
      log.buckets.lo = std::min(log.buckets.lo, r);
      log.buckets.hi = std::max(log.buckets.hi, r);
    }
  }

  log.agent = MetaAgent(hcfg.rate_buckets, P, hcfg.learning_rate, hcfg.decay_learning_rate, hcfg.gamma, hcfg.epsilon);
  MetaAgent& agent = log.agent;
  std::size_t state = agent.state_index(0, 0);
  log.steps.reserve(hcfg.horizon);
  for (std::size_t m = 0; m < hcfg.horizon; ++m) {
    const std::size_t greedy = agent.greedy(state);
    const std::size_t a = agent.act(state, agent_rng);
    MetaStep step;
    step.level = a;
    step.explored = a != greedy;
    step.power_dbm = hcfg.power_levels_dbm[a];
    step.mean_rate = sub_controller_block(cfg, step.power_dbm, hcfg.delta_steps, hcfg.sub_sweeps, channel_rng,
                                          &log.evaluations_per_substep);
    step.reward = step.mean_rate - hcfg.power_weight * dbm_to_watts(step.power_dbm);
    const std::size_t next = agent.state_index(log.buckets.bucket(step.mean_rate), a);
    meta_q_update(agent, state, a, step.reward, next);
    state = next;
    log.steps.push_back(step);
  }
  log.policy_level = agent.policy();
  return log;
}

std::vector<double> mean_rate_per_level(const SystemConfig& cfg, const HierarchicalConfig& hcfg, std::size_t blocks,
                                        Rng& rng) {
  std::vector<double> out;
  for (double p : hcfg.power_levels_dbm) {
    double s = 0.0;
    for (std::size_t b = 0; b < blocks; ++b)
      s += sub_controller_block(cfg, p, hcfg.delta_steps, hcfg.sub_sweeps, rng);
    out.push_back(s / static_cast<double>(blocks));
  }
  return out;
}

double calibrate_power_weight(const std::vector<double>& mean_rates, const std::vector<double>& power_levels_dbm) {
  if (mean_rates.size() != power_levels_dbm.size() || mean_rates.size() < 2)
    throw std::invalid_argument("calibrate_power_weight: need matching vectors of length >= 2");
  const double dp = dbm_to_watts(power_levels_dbm.back()) - dbm_to_watts(power_levels_dbm.front());
  if (!(dp > 0.0)) throw std::invalid_argument("calibrate_power_weight: levels must increase");
  return std::max(0.0, (mean_rates.back() - mean_rates.front()) / dp);
}

void HierarchicalLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(17);
  out << "meta_step,level,power_dbm,mean_rate,reward,explored\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    out << i << ',' << s.level << ',' << s.power_dbm << ',' << s.mean_rate << ',' << s.reward << ','
        << (s.explored ? 1 : 0) << '\n';
  }
}

}  // namespace ris
