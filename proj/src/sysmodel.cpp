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

#include "ris/sysmodel.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace ris {

std::string to_string(const PhaseConfig& cfg) {
  std::ostringstream os;
  for (std::size_t g = 0; g < cfg.size(); ++g) os << (g ? " " : "") << cfg[g];
  return os.str();
}

Rng derive_rng(std::uint64_t seed, std::string_view stream) {
  // FNV-1a of the stream tag, mixed with the seed through seed_seq.
  std::uint64_t tag = 1469598103934665603ULL;
  for (char c : stream) {
    tag ^= static_cast<unsigned char>(c);
    tag *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  return Rng(seq);
}

std::uint64_t config_rank(const PhaseConfig& cfg, int levels) {
  std::uint64_t rank = 0;
  for (int q : cfg.indices) rank = rank * static_cast<std::uint64_t>(levels) + static_cast<std::uint64_t>(q);
  return rank;
}

PhaseConfig config_from_rank(std::uint64_t rank, std::size_t groups, int levels) {
  PhaseConfig cfg(groups, 0);
  for (std::size_t g = groups; g-- > 0;) {
    cfg[g] = static_cast<int>(rank % static_cast<std::uint64_t>(levels));
    rank /= static_cast<std::uint64_t>(levels);
  }
  return cfg;
}

std::uint64_t space_size(std::size_t groups, int levels) {
  std::uint64_t size = 1;
  for (std::size_t g = 0; g < groups; ++g) {
    if (size > std::numeric_limits<std::uint64_t>::max() / static_cast<std::uint64_t>(levels))
      return std::numeric_limits<std::uint64_t>::max();
    size *= static_cast<std::uint64_t>(levels);
  }
  return size;
}

// ---------------------------------------------------------------- config

void SystemConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("SystemConfig: " + msg); };
  if (m_antennas == 0 || k_users == 0 || n_elements == 0 || group_size == 0)
    fail("counts must be positive");
  if (n_elements % group_size != 0) fail("n_elements must be divisible by group_size");
  if (phase_bits < 1 || phase_bits > 16) fail("phase_bits must be in [1, 16]");
  if (m_antennas < k_users) fail("zero-forcing needs m_antennas >= k_users");
  if (!(d_bs_ris > 0.0) || !(d_ris_user_min > 0.0) || !(d_ris_user_max > 0.0))
    fail("distances must be positive");
  if (d_ris_user_min > d_ris_user_max) fail("d_ris_user_min > d_ris_user_max");
  if (!(rician_k >= 0.0)) fail("rician_k must be >= 0");
  if (!std::isfinite(tx_power_dbm) || !std::isfinite(noise_dbm) || !std::isfinite(pathloss_ref_db))
    fail("powers must be finite");
}

double SystemConfig::tx_power_w() const { return std::pow(10.0, (tx_power_dbm - 30.0) / 10.0); }
double SystemConfig::noise_w() const { return std::pow(10.0, (noise_dbm - 30.0) / 10.0); }

double pathloss_linear(double ref_db, double exponent, double distance_m) {
  return std::pow(10.0, -(ref_db + 10.0 * exponent * std::log10(distance_m)) / 10.0);
}

Eigen::VectorXcd ula_steering(std::size_t n, double angle_rad) {
  Eigen::VectorXcd a(static_cast<Eigen::Index>(n));
  const double s = std::numbers::pi * std::sin(angle_rad);
  for (std::size_t i = 0; i < n; ++i) a(static_cast<Eigen::Index>(i)) = std::polar(1.0, s * static_cast<double>(i));
  return a;
}

// ---------------------------------------------------------------- channels

namespace {

cd complex_gaussian(Rng& rng) {
  std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
  const double re = n01(rng);
  const double im = n01(rng);
  return {re, im};
}

}  // namespace

ChannelRealization sample_channels(const SystemConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto N = static_cast<Eigen::Index>(cfg.n_elements);
  const auto M = static_cast<Eigen::Index>(cfg.m_antennas);
  const auto K = static_cast<Eigen::Index>(cfg.k_users);
  const double w_los = std::sqrt(cfg.rician_k / (cfg.rician_k + 1.0));
  const double w_nlos = std::sqrt(1.0 / (cfg.rician_k + 1.0));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> dist(cfg.d_ris_user_min, cfg.d_ris_user_max);

  ChannelRealization real;
  real.aoa_ris = angle(rng);
  real.aod_bs = angle(rng);
  real.pathloss_bs_ris = pathloss_linear(cfg.pathloss_ref_db, cfg.pathloss_exp_bs_ris, cfg.d_bs_ris);
  const Eigen::MatrixXcd g_los =
      ula_steering(cfg.n_elements, real.aoa_ris) * ula_steering(cfg.m_antennas, real.aod_bs).adjoint();
  real.g_bs_ris.resize(N, M);
  for (Eigen::Index n = 0; n < N; ++n)
    for (Eigen::Index m = 0; m < M; ++m)
      real.g_bs_ris(n, m) = w_los * g_los(n, m) + w_nlos * complex_gaussian(rng);
  real.g_bs_ris *= std::sqrt(real.pathloss_bs_ris);

  real.h_ris_user.resize(K, N);
  real.user_distances.resize(cfg.k_users);
  real.pathloss_ris_user.resize(cfg.k_users);
  real.aod_ris_user.resize(cfg.k_users);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    real.user_distances[uk] = dist(rng);
    real.aod_ris_user[uk] = angle(rng);
    real.pathloss_ris_user[uk] =
        pathloss_linear(cfg.pathloss_ref_db, cfg.pathloss_exp_ris_user, real.user_distances[uk]);
    const Eigen::VectorXcd los = ula_steering(cfg.n_elements, real.aod_ris_user[uk]);
    const double amp = std::sqrt(real.pathloss_ris_user[uk]);
    for (Eigen::Index n = 0; n < N; ++n)
      real.h_ris_user(k, n) = amp * (w_los * los(n) + w_nlos * complex_gaussian(rng));
  }
  return real;
}

Eigen::MatrixXcd los_bs_ris(const ChannelRealization& real) {
  return ula_steering(real.n_elements(), real.aoa_ris) *
         ula_steering(real.m_antennas(), real.aod_bs).adjoint();
}

Eigen::VectorXcd los_ris_user(const ChannelRealization& real, std::size_t user) {
  return ula_steering(real.n_elements(), real.aod_ris_user.at(user));
}

ChannelRealization ChannelRealization::select_users(const std::vector<std::size_t>& users) const {
  ChannelRealization out;
  out.g_bs_ris = g_bs_ris;
  out.pathloss_bs_ris = pathloss_bs_ris;
  out.aoa_ris = aoa_ris;
  out.aod_bs = aod_bs;
  out.h_ris_user.resize(static_cast<Eigen::Index>(users.size()), h_ris_user.cols());
  for (std::size_t i = 0; i < users.size(); ++i) {
    const std::size_t u = users[i];
    if (u >= k_users()) throw DimensionError("select_users: user index out of range");
    out.h_ris_user.row(static_cast<Eigen::Index>(i)) = h_ris_user.row(static_cast<Eigen::Index>(u));
    if (u < user_distances.size()) out.user_distances.push_back(user_distances[u]);
    if (u < pathloss_ris_user.size()) out.pathloss_ris_user.push_back(pathloss_ris_user[u]);
    if (u < aod_ris_user.size()) out.aod_ris_user.push_back(aod_ris_user[u]);
  }
  return out;
}

// ---------------------------------------------------------------- effective channel

namespace {

void check_phase(const ChannelRealization& real, const PhaseConfig& phase, int levels) {
  if (phase.size() == 0 || real.n_elements() % phase.size() != 0)
    throw DimensionError("phase config length does not divide the element count");
  if (real.h_ris_user.cols() != real.g_bs_ris.rows())
    throw DimensionError("RIS element count differs between links");
  for (int q : phase.indices)
    if (q < 0 || q >= levels) throw std::out_of_range("phase index outside [0, L)");
}

cd phasor(int q, int levels) {
  return std::polar(1.0, 2.0 * std::numbers::pi * static_cast<double>(q) / static_cast<double>(levels));
}

}  // namespace

Eigen::MatrixXcd effective_channels(const ChannelRealization& real, const PhaseConfig& phase,
                                    int levels) {
  check_phase(real, phase, levels);
  const std::size_t per_group = real.n_elements() / phase.size();
  const auto K = real.h_ris_user.rows();
  Eigen::MatrixXcd h_eff = Eigen::MatrixXcd::Zero(K, real.g_bs_ris.cols());
  for (Eigen::Index n = 0; n < real.g_bs_ris.rows(); ++n) {
    const cd rot = phasor(phase[static_cast<std::size_t>(n) / per_group], levels);
    for (Eigen::Index k = 0; k < K; ++k)
      h_eff.row(k) += std::conj(real.h_ris_user(k, n)) * rot * real.g_bs_ris.row(n);
  }
  return h_eff;
}

// ---------------------------------------------------------------- ZF and rates

namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kRidgeScale = 1e-9;

// Pseudo-inverse through one SVD; regularised when the channel is ill-conditioned.
Eigen::MatrixXcd precoder_impl(const Eigen::MatrixXcd& h_eff, bool* regularised) {
  const auto K = h_eff.rows();
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(h_eff, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  const double smin = s.size() ? s(s.size() - 1) : 0.0;
  const bool ill = smax == 0.0 || smin == 0.0 || smax / smin > kMaxCondition;
  if (regularised) *regularised = ill;

  Eigen::VectorXd inv(s.size());
  if (!ill) {
    inv = s.cwiseInverse();
  } else {
    // trace(H H^H) / K = mean squared singular value
    const double ridge = kRidgeScale * s.squaredNorm() / static_cast<double>(K);
    for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = ridge > 0.0 ? s(i) / (s(i) * s(i) + ridge) : 0.0;
  }
  Eigen::MatrixXcd w = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint();  // M x K
  for (Eigen::Index k = 0; k < w.cols(); ++k) {
    const double norm = w.col(k).norm();
    if (norm > 0.0) w.col(k) /= norm;
  }
  return w;
}

}  // namespace

Eigen::MatrixXcd zf_precoder(const Eigen::MatrixXcd& h_eff) { return precoder_impl(h_eff, nullptr); }

RateResult rate_from_effective(const Eigen::MatrixXcd& h_eff, const SystemConfig& cfg) {
  const auto K = h_eff.rows();
  if (K == 0) throw DimensionError("empty effective channel");
  if (h_eff.cols() < K) throw DimensionError("zero-forcing needs at least as many antennas as users");
  if (!h_eff.allFinite()) throw std::domain_error("non-finite channel entries");

  RateResult out;
  out.per_user_rates.assign(static_cast<std::size_t>(K), 0.0);
  if (h_eff.squaredNorm() == 0.0) return out;

  bool regularised = false;
  const Eigen::MatrixXcd w = precoder_impl(h_eff, &regularised);
  const Eigen::MatrixXcd gains = h_eff * w;  // (k, j): user k through beam j
  const double p = cfg.tx_power_w() / static_cast<double>(K);
  const double noise = cfg.noise_w();
  for (Eigen::Index k = 0; k < K; ++k) {
    double interference = 0.0;
    if (regularised)
      for (Eigen::Index j = 0; j < K; ++j)
        if (j != k) interference += p * std::norm(gains(k, j));
    const double sinr = p * std::norm(gains(k, k)) / (noise + interference);
    const double r = std::log2(1.0 + sinr);
    out.per_user_rates[static_cast<std::size_t>(k)] = r;
    out.sum_rate += r;
  }
  return out;
}

RateResult sum_rate(const ChannelRealization& real, const PhaseConfig& phase, const SystemConfig& cfg) {
  if (real.m_antennas() < real.k_users()) throw DimensionError("m_antennas < k_users");
  return rate_from_effective(effective_channels(real, phase, cfg.levels()), cfg);
}

// ---------------------------------------------------------------- cascaded cache

CascadedChannel::CascadedChannel(const ChannelRealization& real, const SystemConfig& cfg)
    : levels_(cfg.levels()) {
  const std::size_t G = cfg.groups();
  if (real.n_elements() != cfg.n_elements || real.m_antennas() != cfg.m_antennas ||
      static_cast<std::size_t>(real.h_ris_user.cols()) != cfg.n_elements)
    throw DimensionError("realization does not match SystemConfig");
  const auto K = real.h_ris_user.rows();
  const auto M = real.g_bs_ris.cols();
  groups_.assign(G, Eigen::MatrixXcd::Zero(K, M));
  for (std::size_t g = 0; g < G; ++g) {
    const auto first = static_cast<Eigen::Index>(g * cfg.group_size);
    const auto len = static_cast<Eigen::Index>(cfg.group_size);
    groups_[g] = real.h_ris_user.middleCols(first, len).conjugate() * real.g_bs_ris.middleRows(first, len);
  }
  for (int q = 0; q < levels_; ++q) phasors_.push_back(phasor(q, levels_));
}

Eigen::MatrixXcd CascadedChannel::effective(const PhaseConfig& phase) const {
  if (phase.size() != groups_.size()) throw DimensionError("phase config length != group count");
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(groups_[0].rows(), groups_[0].cols());
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    const int q = phase[g];
    if (q < 0 || q >= levels_) throw std::out_of_range("phase index outside [0, L)");
    h += phasors_[static_cast<std::size_t>(q)] * groups_[g];
  }
  return h;
}

Eigen::MatrixXcd CascadedChannel::effective(const PhaseConfig& phase, const std::vector<bool>& active) const {
  if (phase.size() != groups_.size() || active.size() != groups_.size())
    throw DimensionError("phase/mask length != group count");
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(groups_[0].rows(), groups_[0].cols());
  for (std::size_t g = 0; g < groups_.size(); ++g)
    if (active[g]) h += phasors_[static_cast<std::size_t>(phase[g])] * groups_[g];
  return h;
}

SumRateObjective::SumRateObjective(const ChannelRealization& real, const SystemConfig& cfg)
    : cascaded_(real, cfg), cfg_(cfg) {}

double SumRateObjective::operator()(const PhaseConfig& phase) {
  ++evaluations_;
  return rate_from_effective(cascaded_.effective(phase), cfg_).sum_rate;
}

double SumRateObjective::operator()(const PhaseConfig& phase, const std::vector<bool>& active) {
  ++evaluations_;
  return rate_from_effective(cascaded_.effective(phase, active), cfg_).sum_rate;
}

RateResult SumRateObjective::rates(const PhaseConfig& phase) const {
  return rate_from_effective(cascaded_.effective(phase), cfg_);
}

// ---------------------------------------------------------------- statistics

double estimate_k_factor(double m2, double m4) {
  // For Rician |x|: 2 m2^2 - m4 = (LoS power)^2.
  const double d = 2.0 * m2 * m2 - m4;
  if (!(d > 0.0)) return 0.0;
  const double los = std::sqrt(d);
  const double diffuse = m2 - los;
  if (!(diffuse > 0.0)) return std::numeric_limits<double>::infinity();
  return los / diffuse;
}

ChannelStats channel_stats(const SystemConfig& cfg, std::size_t n_samples) {
  if (n_samples < 1000) throw std::invalid_argument("channel_stats needs at least 1000 samples");
  Rng rng = derive_rng(cfg.seed, "channel-stats");
  double g2 = 0.0, g4 = 0.0, h2 = 0.0, hn2 = 0.0, hn4 = 0.0;
  std::size_t ng = 0, nh = 0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const ChannelRealization real = sample_channels(cfg, rng);
    for (Eigen::Index i = 0; i < real.g_bs_ris.size(); ++i) {
      const double p = std::norm(real.g_bs_ris(i)) / real.pathloss_bs_ris;
      g2 += p;
      g4 += p * p;
      ++ng;
    }
    for (Eigen::Index k = 0; k < real.h_ris_user.rows(); ++k) {
      const double pl = real.pathloss_ris_user[static_cast<std::size_t>(k)];
      for (Eigen::Index n = 0; n < real.h_ris_user.cols(); ++n) {
        const double p = std::norm(real.h_ris_user(k, n));
        h2 += p;
        hn2 += p / pl;
        hn4 += (p / pl) * (p / pl);
        ++nh;
      }
    }
  }
  ChannelStats st;
  st.samples = n_samples;
  st.expected_power_bs_ris = pathloss_linear(cfg.pathloss_ref_db, cfg.pathloss_exp_bs_ris, cfg.d_bs_ris);
  st.mean_power_bs_ris = st.expected_power_bs_ris * g2 / static_cast<double>(ng);
  st.mean_power_ris_user = h2 / static_cast<double>(nh);

  // E[PL(d)] for d ~ U[a, b]: PL(d) = c * d^{-alpha}.
  const double a = cfg.d_ris_user_min, b = cfg.d_ris_user_max, alpha = cfg.pathloss_exp_ris_user;
  const double c = std::pow(10.0, -cfg.pathloss_ref_db / 10.0);
  if (b > a) {
    const double integral = std::abs(alpha - 1.0) < 1e-12
                                ? std::log(b / a)
                                : (std::pow(b, 1.0 - alpha) - std::pow(a, 1.0 - alpha)) / (1.0 - alpha);
    st.expected_power_ris_user = c * integral / (b - a);
  } else {
    st.expected_power_ris_user = c * std::pow(a, -alpha);
  }
  st.k_factor_bs_ris = estimate_k_factor(g2 / static_cast<double>(ng), g4 / static_cast<double>(ng));
  st.k_factor_ris_user = estimate_k_factor(hn2 / static_cast<double>(nh), hn4 / static_cast<double>(nh));
  return st;
}

// ---------------------------------------------------------------- features

std::vector<double> channel_features(const ChannelRealization& real, const SystemConfig& cfg) {
  const CascadedChannel cascaded(real, cfg);
  // Dominant BS-side direction of the BS->RIS link; phase fixed so entry 0 is real.
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(real.g_bs_ris, Eigen::ComputeThinV);
  Eigen::VectorXcd v = svd.matrixV().col(0);
  if (std::abs(v(0)) > 0.0) v *= std::conj(v(0)) / std::abs(v(0));

  std::vector<double> f;
  f.reserve(2 * cascaded.groups() * real.k_users());
  for (std::size_t g = 0; g < cascaded.groups(); ++g) {
    const Eigen::VectorXcd proj = cascaded.group(g) * v;
    for (Eigen::Index k = 0; k < proj.size(); ++k) {
      f.push_back(std::abs(proj(k)));
      f.push_back(std::arg(proj(k)));
    }
  }
  return f;
}

std::vector<double> relative_channel_features(const ChannelRealization& real, const SystemConfig& cfg) {
  const std::vector<double> polar = channel_features(real, cfg);
  const std::size_t K = real.k_users();
  const std::size_t G = polar.size() / (2 * K);
  std::vector<double> f(polar.size());
  for (std::size_t g = 0; g < G; ++g) {
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t i = 2 * (g * K + k);
      const double rel = polar[i + 1] - polar[2 * k + 1];
      f[i] = polar[i] * std::cos(rel);
      f[i + 1] = polar[i] * std::sin(rel);
    }
  }
  return f;
}

}  // namespace ris
