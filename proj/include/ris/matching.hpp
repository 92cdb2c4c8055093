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

// Many-to-one matching of users to capacity-limited resources where a user's
// utility may depend on who else shares its resource.

#ifndef RIS_MATCHING_HPP
#define RIS_MATCHING_HPP

#include <functional>
#include <vector>

#include "ris/sysmodel.hpp"

namespace ris {

using Assignment = std::vector<std::size_t>;  // user -> resource

struct MatchingInstance {
  std::size_t n_left = 0;   // users
  std::size_t n_right = 0;  // resources
  std::vector<std::size_t> quotas;
  /// Full assignment -> per-user utility. Must be deterministic.
  std::function<std::vector<double>(const Assignment&)> utility;

  void validate() const;
  bool feasible(const Assignment& a) const;
  double total_utility(const Assignment& a) const;
};

struct Matching {
  Assignment assignment;
  bool operator==(const Matching&) const = default;
};

struct SwapRecord {
  std::size_t round = 0;
  std::size_t user_a = 0;
  std::size_t user_b = 0;
  std::size_t resource_a = 0;  // before the swap
  std::size_t resource_b = 0;
  double total_delta = 0.0;
};

struct SwapMatchingResult {
  Matching matching;
  std::vector<SwapRecord> audit;
  std::size_t rounds = 0;   // full pair scans performed
  bool converged = false;   // last scan accepted nothing
  double total_utility = 0.0;
};

/// True if exchanging the resources of users u and v leaves both at least as
/// well off, one strictly better, and raises the total utility.
bool swap_acceptable(const MatchingInstance& inst, const Assignment& a, std::size_t u, std::size_t v);

/// Pair-swap dynamics from `init`; pairs are scanned in a fresh random order
/// each round. Throws std::invalid_argument for an infeasible init.
SwapMatchingResult swap_matching(const MatchingInstance& inst, const Matching& init, std::size_t max_rounds,
                                 Rng& rng);

/// Exhaustive maximiser of total utility; ties go to the lexicographically
/// smallest assignment. Throws SpaceTooLargeError above `cap` assignments.
Matching brute_force_matching(const MatchingInstance& inst, std::uint64_t cap = 1'000'000);

/// Greedy feasible fill: each user takes the lowest-index resource with room.
Matching first_fit_matching(const MatchingInstance& inst);

/// Resources with per-user gains; users on the same resource split its power
/// equally and see each other's signals as interference scaled by `leakage`.
MatchingInstance power_sharing_instance(const std::vector<std::vector<double>>& gains,
                                        std::vector<std::size_t> quotas, double snr, double leakage);

/// Random exponential gains for power_sharing_instance.
MatchingInstance random_power_sharing_instance(std::size_t n_users, std::size_t n_resources,
                                               std::vector<std::size_t> quotas, Rng& rng);

/// RIS-user association. `per_ris[r]` is the channel from the BS through RIS
/// r to every user (cfg.k_users rows). A user's utility is its rate when RIS
/// r's phases are tuned by element-wise greedy for the users assigned to r and
/// the transmit power is split equally among them. Quotas default to M.
MatchingInstance build_ris_association_instance(const SystemConfig& cfg,
                                                std::vector<ChannelRealization> per_ris);

}  // namespace ris

#endif  // RIS_MATCHING_HPP
