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

#ifndef RIS_COMMON_HPP
#define RIS_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ris {

using Rng = std::mt19937_64;

/// Raised when an enumeration would exceed its configured size cap.
class SpaceTooLargeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on inconsistent matrix / vector shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-group discrete phase indices. Index q of an L-level surface maps to 2*pi*q/L.
struct PhaseConfig {
  std::vector<int> indices;

  PhaseConfig() = default;
  explicit PhaseConfig(std::vector<int> idx) : indices(std::move(idx)) {}
  PhaseConfig(std::initializer_list<int> idx) : indices(idx) {}
  PhaseConfig(std::size_t groups, int value) : indices(groups, value) {}

  std::size_t size() const { return indices.size(); }
  int operator[](std::size_t g) const { return indices[g]; }
  int& operator[](std::size_t g) { return indices[g]; }

  auto operator<=>(const PhaseConfig&) const = default;
  bool operator==(const PhaseConfig&) const = default;
};

std::string to_string(const PhaseConfig& cfg);

/// Independent, reproducible sub-stream for (seed, stream) pairs.
Rng derive_rng(std::uint64_t seed, std::string_view stream);

/// Mixed-radix lexicographic rank of `cfg` over `levels` phases per group.
std::uint64_t config_rank(const PhaseConfig& cfg, int levels);
PhaseConfig config_from_rank(std::uint64_t rank, std::size_t groups, int levels);

/// levels^groups, saturating at UINT64_MAX.
std::uint64_t space_size(std::size_t groups, int levels);

/// True when `candidate` beats `incumbent` by more than round-off.
inline bool strictly_better(double candidate, double incumbent) {
  const double scale = std::max({1.0, std::abs(candidate), std::abs(incumbent)});
  return candidate > incumbent + 1e-12 * scale;
}

}  // namespace ris

#endif  // RIS_COMMON_HPP
