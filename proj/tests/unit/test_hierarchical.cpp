#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ris/hierarchical.hpp"
#include "ris/search.hpp"

using namespace ris;

TEST_CASE("meta Q update") {
  SUBCASE("zero learning rate leaves Q unchanged") {
    MetaAgent agent(2, 3, 0.0, false, 0.9, 0.1);
    agent.q[1] = {1.0, 2.0, 3.0};
    const auto before = agent.q;
    meta_q_update(agent, 0, 1, 5.0, 1);
    CHECK(agent.q == before);
    CHECK(agent.visits[0][1] == 1);
  }
  SUBCASE("one step of the update rule") {
    MetaAgent agent(1, 2, 0.5, false, 0.9, 0.1);
    agent.q[0] = {1.0, 3.0};
    meta_q_update(agent, 0, 0, 2.0, 0);
    CHECK(agent.q[0][0] == doctest::Approx(1.0 + 0.5 * (2.0 + 0.9 * 3.0 - 1.0)));
  }
  SUBCASE("constant rewards are the fixed point") {
    MetaAgent agent(1, 3, 0.2, false, 0.0, 0.1);
    const std::vector<double> r{0.5, -1.0, 2.5};
    for (int k = 0; k < 200; ++k)
      for (std::size_t a = 0; a < 3; ++a) meta_q_update(agent, 0, a, r[a], 0);
    for (std::size_t a = 0; a < 3; ++a) CHECK(agent.q[0][a] == doctest::Approx(r[a]).epsilon(1e-12));
  }
  SUBCASE("1/k rate gives running means of noisy rewards") {
    MetaAgent agent(1, 3, 0.1, true, 0.0, 0.1);
    const std::vector<double> mu{1.0, 2.0, 4.0};
    Rng rng(1);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> sum(3, 0.0);
    std::vector<std::size_t> n(3, 0);
    for (int k = 0; k < 5000; ++k) {
      const std::size_t a = static_cast<std::size_t>(k % 3);
      const double r = mu[a] + noise(rng);
      sum[a] += r;
      ++n[a];
      meta_q_update(agent, 0, a, r, 0);
    }
    for (std::size_t a = 0; a < 3; ++a) {
      CHECK(agent.q[0][a] == doctest::Approx(sum[a] / static_cast<double>(n[a])).epsilon(1e-9));
      CHECK(std::abs(agent.q[0][a] - mu[a]) < 0.05 * mu[a]);
    }
  }
  SUBCASE("index checks") {
    MetaAgent agent(2, 2, 0.1, false, 0.5, 0.1);
    CHECK_THROWS_AS(meta_q_update(agent, 4, 0, 1.0, 0), std::out_of_range);
    CHECK_THROWS_AS(meta_q_update(agent, 0, 2, 1.0, 0), std::out_of_range);
    CHECK_THROWS_AS(meta_q_update(agent, 0, 0, 1.0, 9), std::out_of_range);
  }
}

TEST_CASE("policy extraction") {
  MetaAgent agent(2, 3, 0.1, false, 0.0, 0.1);
  CHECK(agent.policy() == 0);
  // Action 2 is only tried in the rarely visited state but is best there.
  agent.q[0] = {1.0, 0.0, 0.0};
  agent.visits[0] = {50, 0, 0};
  agent.q[1] = {1.0, 0.5, 3.0};
  agent.visits[1] = {1, 1, 2};
  CHECK(agent.policy() == 2);
}

TEST_CASE("rate buckets") {
  RateBuckets b{2.0, 7.0, 10};
  CHECK(b.bucket(-5.0) == 0);
  CHECK(b.bucket(2.0) == 0);
  CHECK(b.bucket(2.49) == 0);
  CHECK(b.bucket(2.51) == 1);
  CHECK(b.bucket(6.99) == 9);
  CHECK(b.bucket(7.0) == 9);
  CHECK(b.bucket(100.0) == 9);
  CHECK(RateBuckets{3.0, 3.0, 10}.bucket(3.0) == 0);
}

TEST_CASE("power weight calibration") {
  CHECK(dbm_to_watts(30.0) == doctest::Approx(1.0));
  CHECK(dbm_to_watts(0.0) == doctest::Approx(1e-3));
  const std::vector<double> levels{24.0, 30.0, 36.0};
  // Rates concave in watts: the chord slope makes the middle level best.
  std::vector<double> rates;
  for (double p : levels) rates.push_back(std::log2(1.0 + 8.0 * dbm_to_watts(p)));
  const double beta = calibrate_power_weight(rates, levels);
  std::vector<double> reward;
  for (std::size_t i = 0; i < 3; ++i) reward.push_back(rates[i] - beta * dbm_to_watts(levels[i]));
  CHECK(reward[0] == doctest::Approx(reward[2]));
  CHECK(reward[1] > reward[0]);
  CHECK_THROWS_AS(calibrate_power_weight({1.0}, {30.0}), std::invalid_argument);
}

TEST_CASE("hierarchical run") {
  SystemConfig cfg;
  cfg.n_elements = 20;
  HierarchicalConfig h;
  h.horizon = 40;
  h.delta_steps = 4;
  SUBCASE("log shape and constant sub-controller cost") {
    for (std::size_t sweeps : {1, 2}) {
      h.sub_sweeps = sweeps;
      Rng rng(2);
      const auto log = hierarchical_run(cfg, h, rng);
      CHECK(log.steps.size() == 40);
      CHECK(log.evaluations_per_substep == cfg.groups() * 4 * sweeps);
      for (const auto& s : log.steps) {
        CHECK(std::isfinite(s.reward));
        CHECK(s.level < 3);
        CHECK(s.power_dbm == h.power_levels_dbm[s.level]);
      }
      CHECK(log.buckets.hi > log.buckets.lo);
    }
  }
  SUBCASE("a single level is a plain greedy loop") {
    h.power_levels_dbm = {30.0};
    Rng rng(3);
    const auto log = hierarchical_run(cfg, h, rng);

    Rng replay(3);
    Rng channel(replay());
    for (std::size_t t = 0; t < h.delta_steps; ++t) sample_channels(cfg, channel);  // calibration block
    for (const auto& s : log.steps) {
      CHECK(s.level == 0);
      double sum = 0.0;
      for (std::size_t t = 0; t < h.delta_steps; ++t) {
        const auto real = sample_channels(cfg, channel);
        sum += greedy_elementwise(real, cfg, PhaseConfig(cfg.groups(), 0), identity_order(cfg.groups()), 1).best_value;
      }
      CHECK(s.mean_rate == doctest::Approx(sum / static_cast<double>(h.delta_steps)).epsilon(1e-12));
      CHECK(s.reward == s.mean_rate);
    }
  }
  SUBCASE("deterministic and written as CSV") {
    Rng a(4), b(4);
    const auto x = hierarchical_run(cfg, h, a);
    const auto y = hierarchical_run(cfg, h, b);
    for (std::size_t i = 0; i < x.steps.size(); ++i) CHECK(x.steps[i].reward == y.steps[i].reward);
    const auto path = std::filesystem::temp_directory_path() / "ris_hier_test.csv";
    x.write_csv(path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "meta_step,level,power_dbm,mean_rate,reward,explored");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 40);
    std::filesystem::remove(path);
  }
  SUBCASE("invalid configs") {
    Rng rng(5);
    h.delta_steps = 0;
    CHECK_THROWS_AS(hierarchical_run(cfg, h, rng), std::invalid_argument);
    h.delta_steps = 4;
    h.power_weight = -1.0;
    CHECK_THROWS_AS(hierarchical_run(cfg, h, rng), std::invalid_argument);
  }
}

TEST_CASE("free power is always taken at the top level") {
  SystemConfig cfg;
  cfg.n_elements = 20;
  HierarchicalConfig h;
  h.horizon = 150;
  h.delta_steps = 5;
  int top = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng = derive_rng(s, "hierarchical");
    top += hierarchical_run(cfg, h, rng).policy_level == 2;
  }
  CHECK(top >= 19);
}
