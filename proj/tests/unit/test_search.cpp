#include "doctest.h"

#include <cmath>

#include "ris/search.hpp"

using namespace ris;

namespace {

SystemConfig config_with_groups(std::size_t groups) {
  SystemConfig cfg;
  cfg.n_elements = groups * cfg.group_size;
  return cfg;
}

ChannelRealization channel_for(const SystemConfig& cfg, std::uint64_t seed) {
  Rng rng = derive_rng(seed, "channel");
  return sample_channels(cfg, rng);
}

double value_of(const ChannelRealization& real, const SystemConfig& cfg, const PhaseConfig& c) {
  return sum_rate(real, c, cfg).sum_rate;
}

// Masked value computed by zeroing the BS->RIS rows of inactive groups.
double masked_value(const ChannelRealization& real, const SystemConfig& cfg, const PhaseConfig& c,
                    const OnOffMask& mask) {
  ChannelRealization r = real;
  for (std::size_t g = 0; g < mask.size(); ++g)
    if (!mask[g])
      r.g_bs_ris.middleRows(static_cast<Eigen::Index>(g * cfg.group_size), static_cast<Eigen::Index>(cfg.group_size))
          .setZero();
  return sum_rate(r, c, cfg).sum_rate;
}

void check_result_consistent(const SearchResult& res, const ChannelRealization& real, const SystemConfig& cfg) {
  CHECK(res.evaluations >= 1);
  const double re = res.best_mask ? masked_value(real, cfg, res.best_config, *res.best_mask)
                                  : value_of(real, cfg, res.best_config);
  CHECK(std::abs(re - res.best_value) <= 1e-12 * std::max(1.0, std::abs(re)));
  for (std::size_t i = 1; i < res.trajectory.size(); ++i) {
    CHECK(res.trajectory[i].best_so_far >= res.trajectory[i - 1].best_so_far);
    CHECK(res.trajectory[i].evaluation >= res.trajectory[i - 1].evaluation);
  }
}

}  // namespace

TEST_CASE("exhaustive search counts and argmax") {
  SUBCASE("single group") {
    SystemConfig cfg = config_with_groups(1);
    const auto real = channel_for(cfg, 3);
    const auto res = exhaustive_search(real, cfg);
    CHECK(res.evaluations == 4);
    // A common phase rotation leaves the rate unchanged, so all four tie.
    for (int q = 0; q < 4; ++q)
      CHECK(value_of(real, cfg, PhaseConfig{q}) == doctest::Approx(res.best_value).epsilon(1e-12));
    CHECK(res.best_config == PhaseConfig{0});
    check_result_consistent(res, real, cfg);
  }
  SUBCASE("default geometry has 256 configurations") {
    SystemConfig cfg;
    const auto real = channel_for(cfg, 0);
    const auto res = exhaustive_search(real, cfg);
    CHECK(res.evaluations == 256);
    check_result_consistent(res, real, cfg);
    for (std::uint64_t r = 0; r < 256; ++r)
      CHECK(value_of(real, cfg, config_from_rank(r, 4, 4)) <= res.best_value + 1e-12);
  }
  SUBCASE("forced alignment, smallest index among ties") {
    SystemConfig cfg;
    cfg.m_antennas = 1;
    cfg.k_users = 1;
    cfg.n_elements = 2;
    cfg.group_size = 1;
    cfg.tx_power_dbm = 0.0;
    cfg.noise_dbm = 0.0;
    ChannelRealization r;
    r.g_bs_ris = Eigen::MatrixXcd::Ones(2, 1);
    r.h_ris_user.resize(1, 2);
    r.h_ris_user << cd(1, 0), cd(-1, 0);
    const auto res = exhaustive_search(r, cfg);
    CHECK(res.best_config == PhaseConfig{0, 2});
    CHECK(res.best_value == doctest::Approx(std::log2(5.0)).epsilon(1e-12));
  }
  SUBCASE("cap") {
    SystemConfig cfg;
    cfg.n_elements = 120;
    cfg.group_size = 10;  // 4^12 configurations
    const auto real = channel_for(cfg, 0);
    CHECK_THROWS_AS(exhaustive_search(real, cfg), SpaceTooLargeError);
    SystemConfig small;
    CHECK_THROWS_AS(exhaustive_search(channel_for(small, 0), small, 255), SpaceTooLargeError);
    CHECK_NOTHROW(exhaustive_search(channel_for(small, 0), small, 256));
  }
}

TEST_CASE("random search") {
  SUBCASE("one draw") {
    SystemConfig cfg = config_with_groups(1);
    const auto real = channel_for(cfg, 1);
    Rng rng(42);
    const auto res = random_search(real, cfg, 1, rng);
    CHECK(res.evaluations == 1);
    CHECK(res.best_value == doctest::Approx(value_of(real, cfg, res.best_config)).epsilon(1e-12));
  }
  SUBCASE("large budget on a 16-point space finds the optimum") {
    SystemConfig cfg = config_with_groups(2);
    const auto real = channel_for(cfg, 7);
    Rng rng(2024);
    const auto res = random_search(real, cfg, 16 * 50, rng);
    const auto ex = exhaustive_search(real, cfg);
    CHECK(res.best_value == doctest::Approx(ex.best_value).epsilon(1e-12));
    check_result_consistent(res, real, cfg);
  }
  SUBCASE("best-so-far grows with budget") {
    SystemConfig cfg;
    const auto real = channel_for(cfg, 2);
    double prev = 0.0;
    for (std::size_t iters : {1, 5, 20, 80, 320}) {
      Rng rng(9);
      const auto res = random_search(real, cfg, iters, rng);
      CHECK(res.best_value >= prev);
      CHECK(res.trajectory.size() == iters);
      prev = res.best_value;
    }
  }
  SUBCASE("zero budget") {
    SystemConfig cfg;
    Rng rng(0);
    CHECK_THROWS_AS(random_search(channel_for(cfg, 0), cfg, 0, rng), std::invalid_argument);
  }
}

TEST_CASE("element-wise greedy") {
  SUBCASE("single group equals exhaustive") {
    SystemConfig cfg = config_with_groups(1);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto real = channel_for(cfg, s);
      CHECK(greedy_elementwise(real, cfg).best_value ==
            doctest::Approx(exhaustive_search(real, cfg).best_value).epsilon(1e-12));
    }
  }
  SUBCASE("bounded by exhaustive, single-sweep count is G*L") {
    SystemConfig cfg;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto real = channel_for(cfg, s);
      const auto one = greedy_elementwise(real, cfg, PhaseConfig(4, 0), identity_order(4), 1);
      CHECK(one.evaluations == 16);
      const auto ex = exhaustive_search(real, cfg);
      CHECK(one.best_value <= ex.best_value + 1e-12);
      const auto multi = greedy_elementwise(real, cfg);
      CHECK(multi.best_value <= ex.best_value + 1e-12);
      CHECK(multi.best_value >= one.best_value - 1e-12);
      CHECK(multi.evaluations % 16 == 0);
      CHECK(multi.evaluations <= 16 * kMaxGreedySweeps);
      check_result_consistent(one, real, cfg);
      check_result_consistent(multi, real, cfg);
    }
  }
  SUBCASE("one sweep stalls below the optimum (pinned seed)") {
    SystemConfig cfg;
    const auto real = channel_for(cfg, 1);
    const auto one = greedy_elementwise(real, cfg, PhaseConfig(4, 0), identity_order(4), 1);
    const auto ex = exhaustive_search(real, cfg);
    CHECK(one.best_value < ex.best_value - 1e-6);
  }
  SUBCASE("converged greedy is coordinate-wise optimal") {
    SystemConfig cfg;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto real = channel_for(cfg, s);
      const auto res = greedy_elementwise(real, cfg, PhaseConfig(4, 0), identity_order(4), 1000);
      CHECK(res.evaluations < 16 * 1000);
      for (const auto& n : one_flip_neighbors(res.best_config, 4))
        CHECK(value_of(real, cfg, n) <= res.best_value + 1e-12);
    }
  }
  SUBCASE("ties keep the incumbent phase") {
    SystemConfig cfg;
    ChannelRealization dead = channel_for(cfg, 0);
    dead.h_ris_user.setZero();
    const PhaseConfig init{3, 1, 2, 0};
    const auto res = greedy_elementwise(dead, cfg, init, identity_order(4), 3);
    CHECK(res.best_config == init);
    CHECK(res.evaluations == 16);
  }
  SUBCASE("order and init are validated") {
    SystemConfig cfg;
    const auto real = channel_for(cfg, 0);
    CHECK_THROWS_AS(greedy_elementwise(real, cfg, PhaseConfig(3, 0), identity_order(4), 1), DimensionError);
    CHECK_THROWS_AS(greedy_elementwise(real, cfg, PhaseConfig(4, 0), identity_order(3), 1), DimensionError);
    CHECK_THROWS_AS(greedy_elementwise(real, cfg, PhaseConfig(4, 0), identity_order(4), 0), std::invalid_argument);
  }
}

TEST_CASE("greedy on/off") {
  SUBCASE("all-off start turns something on") {
    SystemConfig cfg;
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto real = channel_for(cfg, s);
      const auto res = greedy_onoff(real, cfg, OnOffMask(4, false));
      REQUIRE(res.best_mask.has_value());
      CHECK(std::count(res.best_mask->begin(), res.best_mask->end(), true) >= 1);
      CHECK(res.best_value > 0.0);
      CHECK(res.evaluations == 1 + 4 * (4 + 1));
      check_result_consistent(res, real, cfg);
    }
  }
  SUBCASE("two groups beat the trivial masks") {
    SystemConfig cfg = config_with_groups(2);
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto real = channel_for(cfg, s);
      const auto res = greedy_onoff(real, cfg, OnOffMask(2, true));
      CHECK(res.best_value >= masked_value(real, cfg, PhaseConfig(2, 0), OnOffMask(2, true)) - 1e-12);
      CHECK(res.best_value >= 0.0);
      check_result_consistent(res, real, cfg);
    }
  }
  SUBCASE("bounded by the mask-and-phase brute force") {
    for (std::size_t G : {1, 2, 3}) {
      SystemConfig cfg = config_with_groups(G);
      for (std::uint64_t s = 0; s < 4; ++s) {
        const auto real = channel_for(cfg, s);
        double oracle = 0.0;
        for (std::uint64_t m = 0; m < (1u << G); ++m) {
          OnOffMask mask(G);
          for (std::size_t g = 0; g < G; ++g) mask[g] = (m >> g) & 1u;
          for (std::uint64_t r = 0; r < space_size(G, 4); ++r)
            oracle = std::max(oracle, masked_value(real, cfg, config_from_rank(r, G, 4), mask));
        }
        for (bool start_on : {false, true}) {
          const auto res = greedy_onoff(real, cfg, OnOffMask(G, start_on));
          CHECK(res.best_value <= oracle + 1e-12);
        }
      }
    }
  }
}

TEST_CASE("local search") {
  SUBCASE("optimum is a fixed point after one scan") {
    SystemConfig cfg;
    const auto real = channel_for(cfg, 5);
    const auto ex = exhaustive_search(real, cfg);
    const auto res = local_search(real, cfg, ex.best_config);
    CHECK(res.best_config == ex.best_config);
    CHECK(res.evaluations == 1 + 4 * 3);
  }
  SUBCASE("single group equals exhaustive") {
    SystemConfig cfg = config_with_groups(1);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const auto real = channel_for(cfg, s);
      for (int q = 0; q < 4; ++q)
        CHECK(local_search(real, cfg, PhaseConfig{q}).best_value ==
              doctest::Approx(exhaustive_search(real, cfg).best_value).epsilon(1e-12));
    }
  }
  SUBCASE("neighborhood audit and dominance chain") {
    SystemConfig cfg;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto real = channel_for(cfg, s);
      Rng rng(s);
      const PhaseConfig init = random_config(4, 4, rng);
      const auto res = local_search(real, cfg, init);
      CHECK(res.best_value >= value_of(real, cfg, init) - 1e-12);
      CHECK(exhaustive_search(real, cfg).best_value >= res.best_value - 1e-12);
      const auto neighbors = one_flip_neighbors(res.best_config, 4);
      CHECK(neighbors.size() == 12);
      for (const auto& n : neighbors) CHECK(value_of(real, cfg, n) <= res.best_value + 1e-12);
      check_result_consistent(res, real, cfg);
    }
  }
}
