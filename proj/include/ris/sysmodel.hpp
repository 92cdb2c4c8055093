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
//
// RIS-aided multi-user downlink: Rician BS->RIS and RIS->user links, grouped
// discrete RIS phase shifts, zero-forcing precoding at the BS, sum-rate.
// The direct BS->user path is assumed blocked.

#ifndef RIS_SYSMODEL_HPP
#define RIS_SYSMODEL_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <vector>

#include "ris/common.hpp"

namespace ris {

using cd = std::complex<double>;

struct SystemConfig {
  std::size_t m_antennas = 8;
  std::size_t k_users = 5;
  std::size_t n_elements = 40;
  std::size_t group_size = 10;
  std::size_t phase_bits = 2;
  double d_bs_ris = 50.0;        // m
  double d_ris_user_min = 50.0;  // m
  double d_ris_user_max = 60.0;  // m
  double rician_k = 10.0;        // linear
  double pathloss_exp_bs_ris = 2.2;
  double pathloss_exp_ris_user = 2.2;
  double pathloss_ref_db = 30.0;  // loss at 1 m
  double tx_power_dbm = 30.0;     // total
  double noise_dbm = -94.0;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;

  std::size_t groups() const { return n_elements / group_size; }
  int levels() const { return 1 << phase_bits; }
  double tx_power_w() const;
  double noise_w() const;
};

/// Linear power gain of a link of length `distance_m`.
double pathloss_linear(double ref_db, double exponent, double distance_m);

/// Half-wavelength uniform linear array response.
Eigen::VectorXcd ula_steering(std::size_t n, double angle_rad);

struct ChannelRealization {
  Eigen::MatrixXcd g_bs_ris;    // N x M
  Eigen::MatrixXcd h_ris_user;  // K x N, row k is user k's RIS->user vector
  std::vector<double> user_distances;
  double pathloss_bs_ris = 0.0;
  std::vector<double> pathloss_ris_user;

  // LoS geometry, kept so the deterministic component can be rebuilt.
  double aoa_ris = 0.0;
  double aod_bs = 0.0;
  std::vector<double> aod_ris_user;

  std::size_t n_elements() const { return static_cast<std::size_t>(g_bs_ris.rows()); }
  std::size_t m_antennas() const { return static_cast<std::size_t>(g_bs_ris.cols()); }
  std::size_t k_users() const { return static_cast<std::size_t>(h_ris_user.rows()); }

  /// Copy restricted to a subset of users (row order preserved as given).
  ChannelRealization select_users(const std::vector<std::size_t>& users) const;
};

struct RateResult {
  double sum_rate = 0.0;  // bits/s/Hz
  std::vector<double> per_user_rates;
};

ChannelRealization sample_channels(const SystemConfig& cfg, Rng& rng);

/// Deterministic LoS parts (before path-loss and Rician weighting).
Eigen::MatrixXcd los_bs_ris(const ChannelRealization& real);
Eigen::VectorXcd los_ris_user(const ChannelRealization& real, std::size_t user);

/// K x M effective channel: row k = sum_n conj(h_k[n]) e^{j theta(n)} g[n, :].
Eigen::MatrixXcd effective_channels(const ChannelRealization& real, const PhaseConfig& phase,
                                    int levels);

/// ZF precoding with equal power split; see rate_from_effective.
RateResult sum_rate(const ChannelRealization& real, const PhaseConfig& phase,
                    const SystemConfig& cfg);

/// Rates for a given K x M effective channel. Columns of the pseudo-inverse
/// are unit-normalised; ill-conditioned channels (cond > 1e12) fall back to a
/// ridge-regularised inverse, in which case residual interference is counted.
RateResult rate_from_effective(const Eigen::MatrixXcd& h_eff, const SystemConfig& cfg);

/// ZF precoder columns (M x K) for diagnostics and tests.
Eigen::MatrixXcd zf_precoder(const Eigen::MatrixXcd& h_eff);

/// Per-group cascaded channels C_g (K x M each), so that
/// H(theta) = sum_g e^{j theta_g} C_g. Makes repeated objective calls cheap.
class CascadedChannel {
 public:
  CascadedChannel(const ChannelRealization& real, const SystemConfig& cfg);

  std::size_t groups() const { return groups_.size(); }
  int levels() const { return levels_; }
  const Eigen::MatrixXcd& group(std::size_t g) const { return groups_[g]; }

  Eigen::MatrixXcd effective(const PhaseConfig& phase) const;
  /// Groups with active[g] == false reflect nothing.
  Eigen::MatrixXcd effective(const PhaseConfig& phase, const std::vector<bool>& active) const;

 private:
  std::vector<Eigen::MatrixXcd> groups_;
  std::vector<cd> phasors_;
  int levels_;
};

/// Counting sum-rate objective over phase configurations of one realization.
class SumRateObjective {
 public:
  SumRateObjective(const ChannelRealization& real, const SystemConfig& cfg);

  double operator()(const PhaseConfig& phase);
  double operator()(const PhaseConfig& phase, const std::vector<bool>& active);
  RateResult rates(const PhaseConfig& phase) const;

  std::size_t evaluations() const { return evaluations_; }
  std::size_t groups() const { return cascaded_.groups(); }
  int levels() const { return cascaded_.levels(); }
  const SystemConfig& config() const { return cfg_; }

 private:
  CascadedChannel cascaded_;
  SystemConfig cfg_;
  std::size_t evaluations_ = 0;
};

struct ChannelStats {
  std::size_t samples = 0;
  double mean_power_bs_ris = 0.0;         // E|g|^2
  double expected_power_bs_ris = 0.0;     // configured path loss
  double mean_power_ris_user = 0.0;       // E|h|^2 over random user distances
  double expected_power_ris_user = 0.0;   // path loss averaged over the distance range
  double k_factor_bs_ris = 0.0;           // moment-based estimates
  double k_factor_ris_user = 0.0;
};

/// Moment-based check of the channel generator; `n_samples` realizations.
ChannelStats channel_stats(const SystemConfig& cfg, std::size_t n_samples);

/// Moment-based Rician K estimate from second and fourth moments of |x|.
double estimate_k_factor(double second_moment, double fourth_moment);

/// Per-group, per-user cascaded-channel magnitude and phase (2*G*K reals),
/// projected on the dominant BS-side direction of the BS->RIS link.
/// Raw, not standardised.
std::vector<double> channel_features(const ChannelRealization& real, const SystemConfig& cfg);

/// Same coefficients as channel_features, as real and imaginary parts after
/// removing each user's group-0 phase. A per-user phase leaves ZF rates
/// unchanged, so these drop a nuisance variable and have no wrap-around.
std::vector<double> relative_channel_features(const ChannelRealization& real, const SystemConfig& cfg);

}  // namespace ris

#endif  // RIS_SYSMODEL_HPP
