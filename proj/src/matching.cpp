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

#include "ris/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>

#include "ris/search.hpp"

namespace ris {

void MatchingInstance::validate() const {
  if (quotas.size() != n_right) throw std::invalid_argument("MatchingInstance: quotas.size() != n_right");
  if (std::accumulate(quotas.begin(), quotas.end(), std::size_t{0}) < n_left)
    throw std::invalid_argument("MatchingInstance: total quota below number of users");
  if (!utility) throw std::invalid_argument("MatchingInstance: utility callback missing");
}

bool MatchingInstance::feasible(const Assignment& a) const {
  if (a.size() != n_left) return false;
  std::vector<std::size_t> load(n_right, 0);
  for (std::size_t r : a) {
    if (r >= n_right) return false;
    if (++load[r] > quotas[r]) return false;
  }
  return true;
}

double MatchingInstance::total_utility(const Assignment& a) const {
  const auto u = utility(a);
  return std::accumulate(u.begin(), u.end(), 0.0);
}

bool swap_acceptable(const MatchingInstance& inst, const Assignment& a, std::size_t u, std::size_t v) {
  if (a[u] == a[v]) return false;
  const auto before = inst.utility(a);
  Assignment b = a;
  std::swap(b[u], b[v]);
  const auto after = inst.utility(b);
  const bool no_loss = !strictly_better(before[u], after[u]) && !strictly_better(before[v], after[v]);
  const bool some_gain = strictly_better(after[u], before[u]) || strictly_better(after[v], before[v]);
  const double t_before = std::accumulate(before.begin(), before.end(), 0.0);
  const double t_after = std::accumulate(after.begin(), after.end(), 0.0);
  return no_loss && some_gain && strictly_better(t_after, t_before);
}

SwapMatchingResult swap_matching(const MatchingInstance& inst, const Matching& init, std::size_t max_rounds,
                                 Rng& rng) {
  inst.validate();
  if (!inst.feasible(init.assignment)) throw std::invalid_argument("swap_matching: infeasible initial matching");

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t u = 0; u < inst.n_left; ++u)
    for (std::size_t v = u + 1; v < inst.n_left; ++v) pairs.emplace_back(u, v);

  SwapMatchingResult res;
  Assignment a = init.assignment;
  double total = inst.total_utility(a);
  while (res.rounds < max_rounds) {
    ++res.rounds;
    std::shuffle(pairs.begin(), pairs.end(), rng);
    bool accepted = false;
    for (const auto& [u, v] : pairs) {
      if (!swap_acceptable(inst, a, u, v)) continue;
      SwapRecord rec{res.rounds, u, v, a[u], a[v], 0.0};
      std::swap(a[u], a[v]);
      const double next = inst.total_utility(a);
      rec.total_delta = next - total;
      total = next;
      res.audit.push_back(rec);
      accepted = true;
    }
    if (!accepted) {
      res.converged = true;
      break;
    }
  }
  res.matching.assignment = std::move(a);
  res.total_utility = total;
  return res;
}

Matching brute_force_matching(const MatchingInstance& inst, std::uint64_t cap) {
  inst.validate();
  const std::uint64_t total = space_size(inst.n_left, static_cast<int>(inst.n_right));
  if (total > cap)
    throw SpaceTooLargeError("brute_force_matching: " + std::to_string(total) + " assignments exceed cap " +
                             std::to_string(cap));
  std::optional<Assignment> best;
  double best_value = 0.0;
  for (std::uint64_t r = 0; r < total; ++r) {
    const PhaseConfig c = config_from_rank(r, inst.n_left, static_cast<int>(inst.n_right));
    Assignment a(c.indices.begin(), c.indices.end());
    if (!inst.feasible(a)) continue;
    const double v = inst.total_utility(a);
    if (!best || strictly_better(v, best_value)) {
      best = std::move(a);
      best_value = v;
    }
  }
  return Matching{*best};  // validate() guarantees a feasible assignment exists
}

Matching first_fit_matching(const MatchingInstance& inst) {
  inst.validate();
  std::vector<std::size_t> load(inst.n_right, 0);
  Matching m;
  for (std::size_t u = 0; u < inst.n_left; ++u) {
    std::size_t r = 0;
    while (load[r] >= inst.quotas[r]) ++r;
    ++load[r];
    m.assignment.push_back(r);
  }
  return m;
}

MatchingInstance power_sharing_instance(const std::vector<std::vector<double>>& gains,
                                        std::vector<std::size_t> quotas, double snr, double leakage) {
  MatchingInstance inst;
  inst.n_left = gains.size();
  inst.n_right = quotas.size();
  inst.quotas = std::move(quotas);
  for (const auto& row : gains)
    if (row.size() != inst.n_right) throw DimensionError("power_sharing_instance: gain row length != resources");
  inst.utility = [gains, snr, leakage, n_right = inst.n_right](const Assignment& a) {
    std::vector<double> load(n_right, 0.0), on_resource(n_right, 0.0);
    for (std::size_t u = 0; u < a.size(); ++u) {
      load[a[u]] += 1.0;
      on_resource[a[u]] += gains[u][a[u]];
    }
    std::vector<double> out(a.size());
    for (std::size_t u = 0; u < a.size(); ++u) {
      const std::size_t r = a[u];
      const double p = snr / load[r];
      const double signal = p * gains[u][r];
      const double interference = leakage * p * (on_resource[r] - gains[u][r]);
      out[u] = std::log2(1.0 + signal / (1.0 + interference));
    }
    return out;
  };
  return inst;
}

MatchingInstance random_power_sharing_instance(std::size_t n_users, std::size_t n_resources,
                                               std::vector<std::size_t> quotas, Rng& rng) {
  std::exponential_distribution<double> fading(1.0);
  std::vector<std::vector<double>> gains(n_users, std::vector<double>(n_resources));
  for (auto& row : gains)
    for (auto& g : row) g = fading(rng);
  return power_sharing_instance(gains, std::move(quotas), 10.0, 0.1);
}

// ---------------------------------------------------------------- RIS association

namespace {

class AssociationUtility {
 public:
  AssociationUtility(SystemConfig cfg, std::vector<ChannelRealization> per_ris)
      : cfg_(std::move(cfg)), per_ris_(std::move(per_ris)) {}

  std::vector<double> operator()(const Assignment& a) {
    std::vector<double> out(a.size(), 0.0);
    for (std::size_t r = 0; r < per_ris_.size(); ++r) {
      std::vector<std::size_t> users;
      for (std::size_t u = 0; u < a.size(); ++u)
        if (a[u] == r) users.push_back(u);
      if (users.empty()) continue;
      const auto& rates = subset_rates(r, users);
      for (std::size_t i = 0; i < users.size(); ++i) out[users[i]] = rates[i];
    }
    return out;
  }

 private:
  const std::vector<double>& subset_rates(std::size_t ris, const std::vector<std::size_t>& users) {
    auto key = std::make_pair(ris, users);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    SystemConfig sub = cfg_;
    sub.k_users = users.size();
    const ChannelRealization real = per_ris_[ris].select_users(users);
    const SearchResult phases = greedy_elementwise(real, sub);
    return cache_.emplace(std::move(key), sum_rate(real, phases.best_config, sub).per_user_rates).first->second;
  }

  SystemConfig cfg_;
  std::vector<ChannelRealization> per_ris_;
  std::map<std::pair<std::size_t, std::vector<std::size_t>>, std::vector<double>> cache_;
};

}  // namespace

MatchingInstance build_ris_association_instance(const SystemConfig& cfg, std::vector<ChannelRealization> per_ris) {
  cfg.validate();
  if (per_ris.empty()) throw std::invalid_argument("build_ris_association_instance: no RIS channels");
  for (const auto& r : per_ris)
    if (r.k_users() != cfg.k_users || r.m_antennas() != cfg.m_antennas || r.n_elements() != cfg.n_elements)
      throw DimensionError("build_ris_association_instance: realization shape does not match cfg");
  MatchingInstance inst;
  inst.n_left = cfg.k_users;
  inst.n_right = per_ris.size();
  inst.quotas.assign(per_ris.size(), cfg.m_antennas);
  auto shared = std::make_shared<AssociationUtility>(cfg, std::move(per_ris));
  inst.utility = [shared](const Assignment& a) { return (*shared)(a); };
  return inst;
}

}  // namespace ris
