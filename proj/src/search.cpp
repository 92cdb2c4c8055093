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

#include "ris/search.hpp"

#include <numeric>

namespace ris {

bool Incumbent::offer(const PhaseConfig& cfg, double value, std::size_t evaluation_index) {
  const bool improved = !has_ || strictly_better(value, value_);
  if (improved) {
    cfg_ = cfg;
    value_ = value;
    has_ = true;
  }
  if (record_) trace_.push_back({evaluation_index, value_});
  return improved;
}

SearchResult Incumbent::finish(std::size_t evaluations) && {
  SearchResult r;
  r.best_config = std::move(cfg_);
  r.best_value = value_;
  r.evaluations = evaluations;
  r.trajectory = std::move(trace_);
  return r;
}

std::vector<std::size_t> identity_order(std::size_t groups) {
  std::vector<std::size_t> order(groups);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return order;
}

PhaseConfig random_config(std::size_t groups, int levels, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, levels - 1);
  PhaseConfig cfg(groups, 0);
  for (auto& q : cfg.indices) q = pick(rng);
  return cfg;
}

std::vector<PhaseConfig> one_flip_neighbors(const PhaseConfig& cfg, int levels) {
  std::vector<PhaseConfig> out;
  out.reserve(cfg.size() * static_cast<std::size_t>(levels - 1));
  for (std::size_t g = 0; g < cfg.size(); ++g)
    for (int q = 0; q < levels; ++q) {
      if (q == cfg[g]) continue;
      PhaseConfig n = cfg;
      n[g] = q;
      out.push_back(std::move(n));
    }
  return out;
}

// ---------------------------------------------------------------- exhaustive

std::vector<double> enumerate_values(SumRateObjective& objective, std::uint64_t cap) {
  const std::uint64_t total = space_size(objective.groups(), objective.levels());
  if (total > cap)
    throw SpaceTooLargeError("exhaustive enumeration of " + std::to_string(total) +
                             " configurations exceeds cap " + std::to_string(cap));
  std::vector<double> values(total);
  for (std::uint64_t r = 0; r < total; ++r)
    values[r] = objective(config_from_rank(r, objective.groups(), objective.levels()));
  return values;
}

SearchResult exhaustive_search(SumRateObjective& objective, std::uint64_t cap) {
  const std::uint64_t total = space_size(objective.groups(), objective.levels());
  if (total > cap)
    throw SpaceTooLargeError("exhaustive enumeration of " + std::to_string(total) +
                             " configurations exceeds cap " + std::to_string(cap));
  Incumbent inc;
  const std::size_t start = objective.evaluations();
  for (std::uint64_t r = 0; r < total; ++r) {
    const PhaseConfig c = config_from_rank(r, objective.groups(), objective.levels());
    inc.offer(c, objective(c), objective.evaluations() - start);
  }
  return std::move(inc).finish(objective.evaluations() - start);
}

SearchResult exhaustive_search(const ChannelRealization& real, const SystemConfig& cfg, std::uint64_t cap) {
  SumRateObjective objective(real, cfg);
  return exhaustive_search(objective, cap);
}

// ---------------------------------------------------------------- random

SearchResult random_search(SumRateObjective& objective, std::size_t iters, Rng& rng) {
  if (iters == 0) throw std::invalid_argument("random_search: iters must be >= 1");
  Incumbent inc;
  const std::size_t start = objective.evaluations();
  for (std::size_t i = 0; i < iters; ++i) {
    const PhaseConfig c = random_config(objective.groups(), objective.levels(), rng);
    inc.offer(c, objective(c), objective.evaluations() - start);
  }
  return std::move(inc).finish(objective.evaluations() - start);
}

SearchResult random_search(const ChannelRealization& real, const SystemConfig& cfg, std::size_t iters,
                           Rng& rng) {
  SumRateObjective objective(real, cfg);
  return random_search(objective, iters, rng);
}

// ---------------------------------------------------------------- greedy

SearchResult greedy_elementwise(SumRateObjective& objective, const PhaseConfig& init,
                                const std::vector<std::size_t>& order, std::size_t sweeps) {
  const std::size_t G = objective.groups();
  const int L = objective.levels();
  if (sweeps == 0) throw std::invalid_argument("greedy_elementwise: sweeps must be >= 1");
  if (init.size() != G) throw DimensionError("greedy_elementwise: init length != group count");
  if (order.size() != G) throw DimensionError("greedy_elementwise: order must be a permutation of groups");

  Incumbent inc;
  const std::size_t start = objective.evaluations();
  PhaseConfig current = init;
  double current_value = 0.0;
  std::vector<double> vals(static_cast<std::size_t>(L));
  for (std::size_t pass = 0; pass < sweeps; ++pass) {
    bool changed = false;
    for (std::size_t g : order) {
      if (g >= G) throw DimensionError("greedy_elementwise: order entry out of range");
      PhaseConfig trial = current;
      for (int q = 0; q < L; ++q) {
        trial[g] = q;
        vals[static_cast<std::size_t>(q)] = objective(trial);
        inc.offer(trial, vals[static_cast<std::size_t>(q)], objective.evaluations() - start);
      }
      // Collect all L values first, then apply the tie rule.
      const int incumbent = current[g];
      int choice = incumbent;
      for (int q = 0; q < L; ++q)
        if (strictly_better(vals[static_cast<std::size_t>(q)], vals[static_cast<std::size_t>(choice)])) choice = q;
      if (choice != incumbent) {
        current[g] = choice;
        changed = true;
      }
      current_value = vals[static_cast<std::size_t>(choice)];
    }
    if (!changed) break;
  }
  // Accepted changes only ever improve, so the final configuration is the
  // best seen up to round-off ties; report it rather than a tied sibling.
  SearchResult res = std::move(inc).finish(objective.evaluations() - start);
  res.best_config = current;
  res.best_value = current_value;
  return res;
}

SearchResult greedy_elementwise(const ChannelRealization& real, const SystemConfig& cfg,
                                const PhaseConfig& init, const std::vector<std::size_t>& order,
                                std::size_t sweeps) {
  SumRateObjective objective(real, cfg);
  return greedy_elementwise(objective, init, order, sweeps);
}

SearchResult greedy_elementwise(const ChannelRealization& real, const SystemConfig& cfg) {
  return greedy_elementwise(real, cfg, PhaseConfig(cfg.groups(), 0), identity_order(cfg.groups()),
                            kMaxGreedySweeps);
}

// ---------------------------------------------------------------- on/off

SearchResult greedy_onoff(const ChannelRealization& real, const SystemConfig& cfg, const OnOffMask& init) {
  SumRateObjective objective(real, cfg);
  const std::size_t G = objective.groups();
  const int L = objective.levels();
  if (init.size() != G) throw DimensionError("greedy_onoff: mask length != group count");

  OnOffMask mask = init;
  PhaseConfig phases(G, 0);
  double current = objective(phases, mask);
  std::vector<TracePoint> trace{{1, current}};
  auto record = [&](double v) {
    trace.push_back({objective.evaluations(), std::max(trace.back().best_so_far, v)});
  };

  std::vector<double> vals(static_cast<std::size_t>(L));
  for (std::size_t g = 0; g < G; ++g) {
    // "on" candidate: best single-group phase with the rest frozen
    OnOffMask on = mask;
    on[g] = true;
    PhaseConfig trial = phases;
    for (int q = 0; q < L; ++q) {
      trial[g] = q;
      vals[static_cast<std::size_t>(q)] = objective(trial, on);
      record(vals[static_cast<std::size_t>(q)]);
    }
    int best_q = mask[g] ? phases[g] : 0;
    for (int q = 0; q < L; ++q)
      if (strictly_better(vals[static_cast<std::size_t>(q)], vals[static_cast<std::size_t>(best_q)])) best_q = q;
    const double v_on = vals[static_cast<std::size_t>(best_q)];

    OnOffMask off = mask;
    off[g] = false;
    const double v_off = objective(phases, off);
    record(v_off);

    const bool keep_on = mask[g] ? !strictly_better(v_off, v_on) : strictly_better(v_on, v_off);
    mask[g] = keep_on;
    if (keep_on) {
      phases[g] = best_q;
      current = v_on;
    } else {
      current = v_off;
    }
  }

  SearchResult res;
  res.best_config = phases;
  res.best_mask = mask;
  res.best_value = current;
  res.evaluations = objective.evaluations();
  res.trajectory = std::move(trace);
  return res;
}

// ---------------------------------------------------------------- local search

SearchResult local_search(SumRateObjective& objective, const PhaseConfig& init) {
  if (init.size() != objective.groups()) throw DimensionError("local_search: init length != group count");
  const std::size_t start = objective.evaluations();
  Incumbent inc;
  PhaseConfig current = init;
  double value = objective(current);
  inc.offer(current, value, 1);
  for (;;) {
    std::optional<PhaseConfig> move;
    double move_value = value;
    for (const PhaseConfig& n : one_flip_neighbors(current, objective.levels())) {
      const double v = objective(n);
      inc.offer(n, v, objective.evaluations() - start);
      if (strictly_better(v, move_value)) {
        move = n;
        move_value = v;
      }
    }
    if (!move) break;
    current = *move;
    value = move_value;
  }
  SearchResult res = std::move(inc).finish(objective.evaluations() - start);
  res.best_config = current;
  res.best_value = value;
  return res;
}

SearchResult local_search(const ChannelRealization& real, const SystemConfig& cfg, const PhaseConfig& init) {
  SumRateObjective objective(real, cfg);
  return local_search(objective, init);
}

}  // namespace ris
