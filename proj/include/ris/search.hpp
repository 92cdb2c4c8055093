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

#ifndef RIS_SEARCH_HPP
#define RIS_SEARCH_HPP

#include <optional>
#include <vector>

#include "ris/sysmodel.hpp"

namespace ris {

using OnOffMask = std::vector<bool>;

struct TracePoint {
  std::size_t evaluation = 0;  // 1-based objective call index
  double best_so_far = 0.0;
};

struct SearchResult {
  PhaseConfig best_config;
  std::optional<OnOffMask> best_mask;  // set by greedy_onoff only
  double best_value = 0.0;
  std::size_t evaluations = 0;
  std::vector<TracePoint> trajectory;
};

inline constexpr std::uint64_t kDefaultExhaustiveCap = 1'000'000;
inline constexpr std::size_t kMaxGreedySweeps = 10;

/// Best-so-far bookkeeping shared by every optimizer in the library.
class Incumbent {
 public:
  explicit Incumbent(bool record_trajectory = true) : record_(record_trajectory) {}

  /// Report one objective evaluation. Returns true if it improved the incumbent.
  bool offer(const PhaseConfig& cfg, double value, std::size_t evaluation_index);

  bool empty() const { return !has_; }
  const PhaseConfig& config() const { return cfg_; }
  double value() const { return value_; }
  SearchResult finish(std::size_t evaluations) &&;

 private:
  bool record_;
  bool has_ = false;
  PhaseConfig cfg_;
  double value_ = 0.0;
  std::vector<TracePoint> trace_;
};

/// Enumerates all L^G configurations; ties go to the lexicographically smallest.
SearchResult exhaustive_search(const ChannelRealization& real, const SystemConfig& cfg,
                               std::uint64_t cap = kDefaultExhaustiveCap);
SearchResult exhaustive_search(SumRateObjective& objective, std::uint64_t cap = kDefaultExhaustiveCap);

/// Every configuration's value, indexed by config_rank. Oracle helper.
std::vector<double> enumerate_values(SumRateObjective& objective,
                                     std::uint64_t cap = kDefaultExhaustiveCap);

PhaseConfig random_config(std::size_t groups, int levels, Rng& rng);

SearchResult random_search(const ChannelRealization& real, const SystemConfig& cfg,
                           std::size_t iters, Rng& rng);
SearchResult random_search(SumRateObjective& objective, std::size_t iters, Rng& rng);

/// Element-by-element greedy. Each visit evaluates all L phases of one group
/// with the others frozen and keeps the best; the incumbent phase wins ties,
/// otherwise the smallest index. Stops after `sweeps` passes or a pass
/// without change. Evaluations per pass: G*L.
SearchResult greedy_elementwise(const ChannelRealization& real, const SystemConfig& cfg,
                                const PhaseConfig& init, const std::vector<std::size_t>& order,
                                std::size_t sweeps);
SearchResult greedy_elementwise(SumRateObjective& objective, const PhaseConfig& init,
                                const std::vector<std::size_t>& order, std::size_t sweeps);
/// All-zeros init, ascending order, up to kMaxGreedySweeps.
SearchResult greedy_elementwise(const ChannelRealization& real, const SystemConfig& cfg);

/// Sequential on/off pass: group g is switched on (with its best single-group
/// phase) or off, whichever scores higher; the incumbent status wins ties.
SearchResult greedy_onoff(const ChannelRealization& real, const SystemConfig& cfg,
                          const OnOffMask& init);

/// Best-improvement 1-opt descent over single-group phase changes.
SearchResult local_search(const ChannelRealization& real, const SystemConfig& cfg,
                          const PhaseConfig& init);
SearchResult local_search(SumRateObjective& objective, const PhaseConfig& init);

/// Neighbors differing in exactly one group's phase, in (group, phase) order.
std::vector<PhaseConfig> one_flip_neighbors(const PhaseConfig& cfg, int levels);

std::vector<std::size_t> identity_order(std::size_t groups);

}  // namespace ris

#endif  // RIS_SEARCH_HPP
