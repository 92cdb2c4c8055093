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

#include "ris/heuristic_drl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace ris {

namespace {

PhaseConfig rotate(const PhaseConfig& c, int offset, int levels) {
  PhaseConfig r = c;
  for (auto& q : r.indices) q = (q + offset) % levels;
  return r;
}

std::size_t hamming(const PhaseConfig& a, const PhaseConfig& b) {
  std::size_t d = 0;
  for (std::size_t g = 0; g < a.size(); ++g) d += a[g] != b[g];
  return d;
}

// Phases of one group by descending count, ties to the smaller index.
std::vector<int> frequency_order(const std::vector<std::size_t>& counts) {
  std::vector<int> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
  });
  return order;
}

}  // namespace

GreedyTally greedy_tally(SumRateObjective& objective, std::size_t restarts, Rng& rng) {
  if (restarts == 0) throw std::invalid_argument("greedy_tally: restarts must be >= 1");
  const std::size_t G = objective.groups();
  const int L = objective.levels();
  const std::size_t start = objective.evaluations();

  std::vector<SearchResult> finals;
  finals.reserve(restarts);
  for (std::size_t r = 0; r < restarts; ++r) {
    const PhaseConfig init = random_config(G, L, rng);
    std::vector<std::size_t> order = identity_order(G);
    std::shuffle(order.begin(), order.end(), rng);
    finals.push_back(greedy_elementwise(objective, init, order, kMaxGreedySweeps));
  }

  GreedyTally t;
  t.levels = L;
  t.restarts = restarts;
  std::size_t best = 0;
  for (std::size_t r = 1; r < finals.size(); ++r)
    if (strictly_better(finals[r].best_value, finals[best].best_value)) best = r;
  t.best_config = finals[best].best_config;
  t.best_value = finals[best].best_value;

  t.frequency.assign(G, std::vector<std::size_t>(static_cast<std::size_t>(L), 0));
  for (const auto& f : finals) {
    int best_offset = 0;
    std::size_t best_dist = G + 1;
    for (int d = 0; d < L; ++d) {
      const std::size_t dist = hamming(rotate(f.best_config, d, L), t.best_config);
      if (dist < best_dist) {
        best_dist = dist;
        best_offset = d;
      }
    }
    const PhaseConfig aligned = rotate(f.best_config, best_offset, L);
    for (std::size_t g = 0; g < G; ++g) ++t.frequency[g][static_cast<std::size_t>(aligned[g])];
  }
  t.evaluations = objective.evaluations() - start;
  return t;
}

// ---------------------------------------------------------------- reduced set

std::size_t ReducedActionSet::joint_size() const {
  std::size_t n = 1;
  for (const auto& a : allowed) n *= a.size();
  return n;
}

double ReducedActionSet::reduction_ratio() const {
  const double full = static_cast<double>(space_size(groups(), levels));
  return 1.0 - static_cast<double>(joint_size()) / full;
}

std::vector<PhaseConfig> ReducedActionSet::joint() const {
  const std::size_t n = joint_size();
  std::vector<PhaseConfig> out;
  out.reserve(n);
  std::vector<std::size_t> pos(groups(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    PhaseConfig c(groups(), 0);
    for (std::size_t g = 0; g < groups(); ++g) c[g] = allowed[g][pos[g]];
    out.push_back(std::move(c));
    for (std::size_t g = groups(); g-- > 0;) {
      if (++pos[g] < allowed[g].size()) break;
      pos[g] = 0;
    }
  }
  return out;
}

std::optional<std::size_t> ReducedActionSet::index_of(const PhaseConfig& cfg) const {
  if (cfg.size() != groups()) return std::nullopt;
  std::size_t idx = 0;
  for (std::size_t g = 0; g < groups(); ++g) {
    const auto it = std::find(allowed[g].begin(), allowed[g].end(), cfg[g]);
    if (it == allowed[g].end()) return std::nullopt;
    idx = idx * allowed[g].size() + static_cast<std::size_t>(it - allowed[g].begin());
  }
  return idx;
}

std::string ReducedActionSet::to_json() const {
  nlohmann::json j;
  j["levels"] = levels;
  j["target_rho"] = target_rho;
  j["achieved_rho"] = reduction_ratio();
  j["joint_size"] = joint_size();
  j["allowed"] = allowed;
  j["frequency"] = frequency;
  j["best_greedy_config"] = best_greedy.indices;
  j["best_greedy_value"] = best_greedy_value;
  j["pre_run_evaluations"] = pre_run_evaluations;
  return j.dump(2);
}

ReducedActionSet select_reduced_set(const GreedyTally& tally, double target_rho) {
  if (!(target_rho >= 0.0 && target_rho < 1.0))
    throw std::invalid_argument("select_reduced_set: target_rho must be in [0, 1)");
  const std::size_t G = tally.frequency.size();
  const auto L = static_cast<std::size_t>(tally.levels);
  const double full = static_cast<double>(space_size(G, tally.levels));
  const auto target = static_cast<std::size_t>(std::ceil((1.0 - target_rho) * full - 1e-9));

  std::vector<std::vector<int>> order(G);
  std::vector<std::size_t> taken(G, 1);
  for (std::size_t g = 0; g < G; ++g) order[g] = frequency_order(tally.frequency[g]);

  std::size_t joint = 1;
  while (joint < target) {
    std::optional<std::size_t> pick;
    for (std::size_t g = 0; g < G; ++g) {
      if (taken[g] == L) continue;
      if (!pick) {
        pick = g;
        continue;
      }
      const std::size_t count = tally.frequency[g][static_cast<std::size_t>(order[g][taken[g]])];
      const std::size_t best_count = tally.frequency[*pick][static_cast<std::size_t>(order[*pick][taken[*pick]])];
      // Expanding a larger subset grows the joint size by a smaller factor.
      if (count > best_count || (count == best_count && taken[g] > taken[*pick])) pick = g;
    }
    if (!pick) break;
    joint = joint / taken[*pick] * (taken[*pick] + 1);
    ++taken[*pick];
  }

  ReducedActionSet rs;
  rs.levels = tally.levels;
  rs.target_rho = target_rho;
  rs.frequency = tally.frequency;
  rs.best_greedy = tally.best_config;
  rs.best_greedy_value = tally.best_value;
  rs.pre_run_evaluations = tally.evaluations;
  rs.allowed.resize(G);
  for (std::size_t g = 0; g < G; ++g) {
    rs.allowed[g].assign(order[g].begin(), order[g].begin() + static_cast<std::ptrdiff_t>(taken[g]));
    if (g < tally.best_config.size() &&
        std::find(rs.allowed[g].begin(), rs.allowed[g].end(), tally.best_config[g]) == rs.allowed[g].end())
      rs.allowed[g].push_back(tally.best_config[g]);
    std::sort(rs.allowed[g].begin(), rs.allowed[g].end());
  }
  return rs;
}

ReducedActionSet reduce_action_space(const ChannelRealization& real, const SystemConfig& cfg, double target_rho,
                                     std::size_t restarts, Rng& rng) {
  SumRateObjective objective(real, cfg);
  return select_reduced_set(greedy_tally(objective, restarts, rng), target_rho);
}

// ---------------------------------------------------------------- exploration

HeuristicExplorer::HeuristicExplorer(const ReducedActionSet& reduced, const ChannelRealization& real,
                                     const SystemConfig& cfg)
    : reduced_(&reduced), joint_(reduced.joint()), objective_(real, cfg) {}

std::size_t HeuristicExplorer::operator()(std::size_t greedy_action, Rng&) {
  const PhaseConfig start = joint_.at(greedy_action);
  double best_value = objective_(start);
  PhaseConfig best = start;
  for (std::size_t g = 0; g < start.size(); ++g) {
    for (int q : reduced_->allowed[g]) {
      if (q == start[g]) continue;
      PhaseConfig n = start;
      n[g] = q;
      const double v = objective_(n);
      if (strictly_better(v, best_value)) {
        best_value = v;
        best = std::move(n);
      }
    }
  }
  return *reduced_->index_of(best);
}

// ---------------------------------------------------------------- training

TrainLog heuristic_dqn_train(const ChannelRealization& real, const SystemConfig& cfg,
                             const ReducedActionSet& reduced, const DqnConfig& dcfg, std::size_t iterations,
                             Rng& rng, bool heuristic_exploration) {
  PhaseEnv env(real, cfg, reduced.joint());
  if (!heuristic_exploration) return dqn_train(env, dcfg, iterations, rng);
  HeuristicExplorer explorer(reduced, real, cfg);
  return dqn_train(env, dcfg, iterations, rng, std::ref(explorer));
}

HeuristicDrlRun heuristic_drl_run(const ChannelRealization& real, const SystemConfig& cfg,
                                  const HeuristicDrlConfig& hcfg, std::size_t iterations, Rng& rng) {
  const auto t0 = std::chrono::steady_clock::now();
  HeuristicDrlRun run;
  run.reduced = reduce_action_space(real, cfg, hcfg.target_rho, hcfg.restarts, rng);
  run.pre_run_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.log = heuristic_dqn_train(real, cfg, run.reduced, hcfg.dqn, iterations, rng, hcfg.heuristic_exploration);
  run.final_config = run.reduced.joint().at(run.log.final_action);
  run.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

}  // namespace ris
