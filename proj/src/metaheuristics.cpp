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

#include "ris/metaheuristics.hpp"

#include <algorithm>
#include <cmath>

namespace ris {

void PsoParams::validate() const {
  if (swarm_size < 2) throw std::invalid_argument("PsoParams: swarm_size must be >= 2");
  if (!(inertia >= 0.0 && inertia <= 1.0)) throw std::invalid_argument("PsoParams: inertia must be in [0, 1]");
  if (!(c1 >= 0.0) || !(c2 >= 0.0)) throw std::invalid_argument("PsoParams: c1, c2 must be >= 0");
  if (iters == 0) throw std::invalid_argument("PsoParams: iters must be >= 1");
  if (v_max && !(*v_max > 0.0)) throw std::invalid_argument("PsoParams: v_max must be > 0");
}

void GaParams::validate() const {
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(crossover_prob) || !prob(mutation_prob)) throw std::invalid_argument("GaParams: probabilities must be in [0, 1]");
  if (pop_size < 2 || pop_size % 2 != 0) throw std::invalid_argument("GaParams: pop_size must be even and >= 2");
  if (elite_count >= pop_size) throw std::invalid_argument("GaParams: elite_count must be < pop_size");
  if (tournament_size == 0) throw std::invalid_argument("GaParams: tournament_size must be >= 1");
  if (iters == 0) throw std::invalid_argument("GaParams: iters must be >= 1");
}

void TabuParams::validate() const {
  if (tenure == 0) throw std::invalid_argument("TabuParams: tenure must be >= 1");
}

// ---------------------------------------------------------------- PSO

namespace {

PhaseConfig discretise(const std::vector<double>& x, int levels) {
  PhaseConfig c(x.size(), 0);
  for (std::size_t g = 0; g < x.size(); ++g)
    c[g] = std::clamp(static_cast<int>(std::floor(x[g])), 0, levels - 1);
  return c;
}

double wrap(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  if (r >= period) r = 0.0;  // fmod of -tiny can round up to period
  return r;
}

}  // namespace

SearchResult pso(SumRateObjective& objective, const PsoParams& params, Rng& rng, PsoSwarmState* final_state) {
  params.validate();
  const std::size_t G = objective.groups();
  const auto L = static_cast<double>(objective.levels());
  const double v_max = params.v_max.value_or(L / 2.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, L);
  std::uniform_real_distribution<double> vel(-v_max, v_max);

  const std::size_t S = params.swarm_size;
  std::vector<std::vector<double>> x(S, std::vector<double>(G)), v(S, std::vector<double>(G));
  std::vector<std::vector<double>> pbest_x(S);
  std::vector<double> pbest_f(S);
  std::vector<double> gbest_x;
  double gbest_f = 0.0;
  bool have_gbest = false;

  Incumbent inc;
  const std::size_t start = objective.evaluations();
  auto evaluate = [&](std::size_t i) {
    const PhaseConfig c = discretise(x[i], objective.levels());
    const double f = objective(c);
    inc.offer(c, f, objective.evaluations() - start);
    return f;
  };

  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t g = 0; g < G; ++g) {
      x[i][g] = pos(rng);
      v[i][g] = vel(rng);
    }
  }
  // Fitness of a swarm step is collected before any best-position update.
  std::vector<double> f(S);
  for (std::size_t i = 0; i < S; ++i) f[i] = evaluate(i);
  for (std::size_t i = 0; i < S; ++i) {
    pbest_x[i] = x[i];
    pbest_f[i] = f[i];
    if (!have_gbest || strictly_better(f[i], gbest_f)) {
      gbest_x = x[i];
      gbest_f = f[i];
      have_gbest = true;
    }
  }
  std::vector<TracePoint> trace{{objective.evaluations() - start, gbest_f}};

  for (std::size_t it = 0; it < params.iters; ++it) {
    for (std::size_t i = 0; i < S; ++i) {
      for (std::size_t g = 0; g < G; ++g) {
        const double r1 = params.unit_coefficients ? 1.0 : u01(rng);
        const double r2 = params.unit_coefficients ? 1.0 : u01(rng);
        double vi = params.inertia * v[i][g] + params.c1 * r1 * (pbest_x[i][g] - x[i][g]) +
                    params.c2 * r2 * (gbest_x[g] - x[i][g]);
        v[i][g] = std::clamp(vi, -v_max, v_max);
        x[i][g] = wrap(x[i][g] + v[i][g], L);
      }
    }
    for (std::size_t i = 0; i < S; ++i) f[i] = evaluate(i);
    for (std::size_t i = 0; i < S; ++i) {
      if (strictly_better(f[i], pbest_f[i])) {
        pbest_x[i] = x[i];
        pbest_f[i] = f[i];
      }
      if (strictly_better(f[i], gbest_f)) {
        gbest_x = x[i];
        gbest_f = f[i];
      }
    }
    trace.push_back({objective.evaluations() - start, gbest_f});
  }

  if (final_state) {
    final_state->positions.clear();
    for (const auto& xi : x) final_state->positions.push_back(discretise(xi, objective.levels()));
    final_state->gbest = discretise(gbest_x, objective.levels());
  }
  SearchResult res = std::move(inc).finish(objective.evaluations() - start);
  res.best_config = discretise(gbest_x, objective.levels());
  res.best_value = gbest_f;
  res.trajectory = std::move(trace);
  return res;
}

SearchResult pso(SumRateObjective& objective, const PsoParams& params, Rng& rng) {
  return pso(objective, params, rng, nullptr);
}

SearchResult pso(const ChannelRealization& real, const SystemConfig& cfg, const PsoParams& params, Rng& rng) {
  SumRateObjective objective(real, cfg);
  return pso(objective, params, rng);
}

// ---------------------------------------------------------------- GA

namespace {

struct Individual {
  PhaseConfig genes;
  double fitness = 0.0;
};

}  // namespace

SearchResult ga(SumRateObjective& objective, const GaParams& params, Rng& rng,
                std::vector<double>* generation_best) {
  params.validate();
  const std::size_t G = objective.groups();
  const int L = objective.levels();
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, params.pop_size - 1);
  std::uniform_int_distribution<int> other_phase(1, std::max(1, L - 1));

  Incumbent inc;
  const std::size_t start = objective.evaluations();
  auto evaluate = [&](const PhaseConfig& c) {
    const double f = objective(c);
    inc.offer(c, f, objective.evaluations() - start);
    return f;
  };

  std::vector<Individual> pop(params.pop_size);
  for (auto& ind : pop) ind.genes = random_config(G, L, rng);
  for (auto& ind : pop) ind.fitness = evaluate(ind.genes);

  auto by_fitness = [](const Individual& a, const Individual& b) { return a.fitness > b.fitness; };
  auto tournament = [&]() -> const Individual& {
    std::size_t best = pick(rng);
    for (std::size_t t = 1; t < params.tournament_size; ++t) {
      const std::size_t c = pick(rng);
      if (strictly_better(pop[c].fitness, pop[best].fitness)) best = c;
    }
    return pop[best];
  };
  auto record_generation = [&]() {
    if (!generation_best) return;
    double b = pop[0].fitness;
    for (const auto& ind : pop) b = std::max(b, ind.fitness);
    generation_best->push_back(b);
  };

  std::vector<TracePoint> trace{{objective.evaluations() - start, inc.value()}};
  record_generation();

  for (std::size_t gen = 0; gen < params.iters; ++gen) {
    std::stable_sort(pop.begin(), pop.end(), by_fitness);
    std::vector<Individual> next(pop.begin(), pop.begin() + static_cast<std::ptrdiff_t>(params.elite_count));
    std::vector<PhaseConfig> children;
    while (next.size() + children.size() < params.pop_size) {
      PhaseConfig a = tournament().genes;
      PhaseConfig b = tournament().genes;
      if (G > 1 && u01(rng) < params.crossover_prob) {
        std::uniform_int_distribution<std::size_t> cut_dist(1, G - 1);
        const std::size_t cut = cut_dist(rng);
        for (std::size_t g = cut; g < G; ++g) std::swap(a[g], b[g]);
      }
      for (PhaseConfig* child : {&a, &b}) {
        for (std::size_t g = 0; g < G; ++g)
          if (L > 1 && u01(rng) < params.mutation_prob) (*child)[g] = ((*child)[g] + other_phase(rng)) % L;
      }
      children.push_back(std::move(a));
      if (next.size() + children.size() < params.pop_size) children.push_back(std::move(b));
    }
    for (auto& c : children) {
      const double fit = evaluate(c);
      next.push_back({std::move(c), fit});
    }
    pop = std::move(next);
    trace.push_back({objective.evaluations() - start, inc.value()});
    record_generation();
  }

  SearchResult res = std::move(inc).finish(objective.evaluations() - start);
  res.trajectory = std::move(trace);
  return res;
}

SearchResult ga(const ChannelRealization& real, const SystemConfig& cfg, const GaParams& params, Rng& rng) {
  SumRateObjective objective(real, cfg);
  return ga(objective, params, rng);
}

// ---------------------------------------------------------------- tabu

SearchResult tabu(SumRateObjective& objective, const TabuParams& params, const PhaseConfig& init) {
  params.validate();
  if (init.size() != objective.groups()) throw DimensionError("tabu: init length != group count");
  const std::size_t G = objective.groups();
  const int L = objective.levels();

  Incumbent inc;
  const std::size_t start = objective.evaluations();
  PhaseConfig current = init;
  inc.offer(current, objective(current), 1);
  std::vector<TracePoint> trace{{1, inc.value()}};

  // expiry[g * L + q]: first step at which moving group g to phase q is allowed again
  std::vector<std::size_t> expiry(G * static_cast<std::size_t>(L), 0);

  for (std::size_t step = 0; step < params.iters; ++step) {
    std::optional<PhaseConfig> move;
    double move_value = 0.0;
    std::size_t move_group = 0;
    const double best_ever = inc.value();
    for (std::size_t g = 0; g < G; ++g) {
      for (int q = 0; q < L; ++q) {
        if (q == current[g]) continue;
        PhaseConfig n = current;
        n[g] = q;
        const double v = objective(n);
        const bool is_tabu = expiry[g * static_cast<std::size_t>(L) + static_cast<std::size_t>(q)] > step;
        const bool aspirated = params.aspiration && strictly_better(v, best_ever);
        inc.offer(n, v, objective.evaluations() - start);
        if (is_tabu && !aspirated) continue;
        if (!move || strictly_better(v, move_value)) {
          move = std::move(n);
          move_value = v;
          move_group = g;
        }
      }
    }
    trace.push_back({objective.evaluations() - start, inc.value()});
    if (!move) break;
    const int old_phase = current[move_group];
    expiry[move_group * static_cast<std::size_t>(L) + static_cast<std::size_t>(old_phase)] = step + 1 + params.tenure;
    current = std::move(*move);
  }

  SearchResult res = std::move(inc).finish(objective.evaluations() - start);
  res.trajectory = std::move(trace);
  return res;
}

SearchResult tabu(const ChannelRealization& real, const SystemConfig& cfg, const TabuParams& params,
                  const PhaseConfig& init) {
  SumRateObjective objective(real, cfg);
  return tabu(objective, params, init);
}

}  // namespace ris
