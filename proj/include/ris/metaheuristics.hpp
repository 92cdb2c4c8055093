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

#ifndef RIS_METAHEURISTICS_HPP
#define RIS_METAHEURISTICS_HPP

#include "ris/search.hpp"

namespace ris {

struct PsoParams {
  std::size_t swarm_size = 20;
  double inertia = 0.7;
  double c1 = 1.5;
  double c2 = 1.5;
  std::size_t iters = 100;
  std::optional<double> v_max;  // unset: L/2
  // Test hook: use r1 = r2 = 1 instead of uniform draws.
  bool unit_coefficients = false;

  void validate() const;
};

struct GaParams {
  std::size_t pop_size = 20;
  double crossover_prob = 0.8;
  double mutation_prob = 0.05;
  std::size_t elite_count = 2;
  std::size_t iters = 50;
  std::size_t tournament_size = 3;

  void validate() const;
};

struct TabuParams {
  std::size_t tenure = 5;
  std::size_t iters = 200;
  bool aspiration = true;

  void validate() const;
};

/// Global-best PSO over continuous positions in [0, L)^G; fitness is taken at
/// floor(x) per coordinate. Trajectory has one point per iteration (plus the
/// initial swarm), each the global best so far.
SearchResult pso(SumRateObjective& objective, const PsoParams& params, Rng& rng);
SearchResult pso(const ChannelRealization& real, const SystemConfig& cfg, const PsoParams& params, Rng& rng);

/// Final particle positions after a pso run, discretised. For tests.
struct PsoSwarmState {
  std::vector<PhaseConfig> positions;
  PhaseConfig gbest;
};
SearchResult pso(SumRateObjective& objective, const PsoParams& params, Rng& rng, PsoSwarmState* final_state);

/// Generational GA: tournament selection, one-point crossover, per-gene
/// mutation to a different phase, elitism. Trajectory has one point per
/// generation holding the best-ever value; `generation_best` (if non-null)
/// receives the best fitness present in each generation's population.
SearchResult ga(SumRateObjective& objective, const GaParams& params, Rng& rng,
                std::vector<double>* generation_best = nullptr);
SearchResult ga(const ChannelRealization& real, const SystemConfig& cfg, const GaParams& params, Rng& rng);

/// Tabu search over single-group moves. A move's attribute is (group,
/// new phase); after a move the reverse attribute (group, old phase) is tabu
/// for `tenure` steps. Non-improving moves are accepted. Stops after `iters`
/// moves or when every neighbor is tabu and none qualifies for aspiration.
SearchResult tabu(SumRateObjective& objective, const TabuParams& params, const PhaseConfig& init);
SearchResult tabu(const ChannelRealization& real, const SystemConfig& cfg, const TabuParams& params,
                  const PhaseConfig& init);

}  // namespace ris

#endif  // RIS_METAHEURISTICS_HPP
