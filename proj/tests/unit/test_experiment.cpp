#include "doctest.h"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ris/experiment.hpp"
#include "ris/search.hpp"

using namespace ris;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("ris_experiment_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> column(const CsvTable& t, const std::string& name) {
  std::vector<double> out;
  const std::size_t c = t.column(name);
  for (const auto& r : t.rows) out.push_back(r[c]);
  return out;
}

}  // namespace

TEST_CASE("summary statistics") {
  const Stats s = summarize({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(s.n == 8);
  CHECK(s.mean == doctest::Approx(5.0));
  CHECK(s.stdev == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(summarize({3.5}).stdev == 0.0);
  CHECK(summarize({}).n == 0);
}

TEST_CASE("trailing average and convergence helpers") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(trailing_average(x, 1) == x);
  const auto t = trailing_average(x, 3);
  CHECK(t[0] == doctest::Approx(1.0));
  CHECK(t[1] == doctest::Approx(1.5));
  CHECK(t[2] == doctest::Approx(2.0));
  CHECK(t[4] == doctest::Approx(4.0));
  CHECK_THROWS_AS(trailing_average(x, 0), std::invalid_argument);

  CHECK(plateau(x, 2) == doctest::Approx(4.5));
  CHECK(plateau(x, 100) == doctest::Approx(3.0));

  // Step from 0 to 1 after 500 iterations: the window of 100 first holds 90
  // ones at iteration 590.
  std::vector<double> step(2000, 0.0);
  std::fill(step.begin() + 500, step.end(), 1.0);
  CHECK(iterations_to_fraction(step) == 590);
  // Never a full window.
  CHECK(iterations_to_fraction(std::vector<double>(50, 1.0)) == 51);
  // Already converged: the first full window counts.
  CHECK(iterations_to_fraction(std::vector<double>(300, 2.0)) == 100);
}

TEST_CASE("parallel_for") {
  std::vector<std::atomic<int>> hits(97);
  parallel_for(hits.size(), 3, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 7) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("experiment config") {
  ExperimentConfig cfg;
  SUBCASE("defaults") {
    CHECK(cfg.iterations == 8000);
    CHECK(cfg.runs == 10);
    CHECK(cfg.system.k_users == 5);
    CHECK(cfg.system.group_size == 10);
    CHECK(cfg.system.phase_bits == 2);
    CHECK(cfg.system.d_bs_ris == 50.0);
    CHECK(cfg.system.d_ris_user_min == 50.0);
    CHECK(cfg.system.d_ris_user_max == 60.0);
    cfg.command = "sweep-elements";
    CHECK(cfg.resolved_elements() == std::vector<std::size_t>{20, 30, 40});
    CHECK(cfg.resolved_algos() == std::vector<std::string>{"exhaustive", "random", "dqn", "heuristic-drl"});
    cfg.command = "reduction-sweep";
    CHECK(cfg.resolved_rho() == std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9, 0.95});
    CHECK_NOTHROW(cfg.validate());
  }
  SUBCASE("strict values") {
    cfg.set("runs", " 3 ");
    CHECK(cfg.runs == 3);
    cfg.set("elements", "20, 40");
    CHECK(cfg.elements == std::vector<std::size_t>{20, 40});
    cfg.set("rician_k", "4.5");
    CHECK(cfg.system.rician_k == 4.5);
    cfg.set("power_weight", "0.25");
    CHECK(cfg.power_weight == 0.25);
    CHECK_THROWS_AS(cfg.set("runs", "abc"), ConfigError);
    CHECK_THROWS_AS(cfg.set("runs", "5x"), ConfigError);
    CHECK_THROWS_AS(cfg.set("runs", "-1"), ConfigError);
    CHECK_THROWS_AS(cfg.set("rho", "0.5,zz"), ConfigError);
    CHECK_THROWS_AS(cfg.set("rician_k", "nan"), ConfigError);
    CHECK_THROWS_AS(cfg.set("no_such_key", "1"), ConfigError);
  }
  SUBCASE("validation") {
    cfg.command = "fly";
    CHECK_THROWS_AS(cfg.validate(), UnknownCommandError);
    cfg.command = "runtime";
    cfg.runs = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.runs = 1;
    cfg.algos = {"dqn", "simulated-annealing"};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.algos.clear();
    cfg.rho = {1.0};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.rho.clear();
    cfg.system.group_size = 3;  // 40 elements do not split into groups of 3
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("file, overrides and echo") {
    const auto dir = scratch("config");
    fs::create_directories(dir);
    {
      std::ofstream f(dir / "a.cfg");
      f << "# comment\n\nruns = 4\nseed=9  # trailing\nalgos=dqn,greedy\n";
    }
    cfg.load_file(dir / "a.cfg");
    cfg.set("runs", "2");  // a flag given after the file wins
    cfg.command = "runtime";
    CHECK(cfg.runs == 2);
    CHECK(cfg.seed == 9);
    CHECK(cfg.algos == std::vector<std::string>{"dqn", "greedy"});

    // The echo is itself a loadable config that reproduces the same echo.
    {
      std::ofstream f(dir / "echo.cfg");
      f << cfg.echo();
    }
    ExperimentConfig back;
    back.load_file(dir / "echo.cfg");
    CHECK(back.echo() == cfg.echo());

    {
      std::ofstream f(dir / "bad.cfg");
      f << "runs\n";
    }
    CHECK_THROWS_AS(back.load_file(dir / "bad.cfg"), ConfigError);
    CHECK_THROWS_AS(back.load_file(dir / "missing.cfg"), ConfigError);
    fs::remove_all(dir);
  }
}

TEST_CASE("run_algorithm") {
  SystemConfig sys;
  sys.n_elements = 20;
  RunOptions opts;
  opts.iterations = 300;
  const double best = run_algorithm("exhaustive", sys, 5, opts).sum_rate;
  CHECK(best == doctest::Approx(exhaustive_search(experiment_channel(sys, 5), sys).best_value));
  for (const auto& algo : known_algorithms()) {
    const AlgoRun r = run_algorithm(algo, sys, 5, opts);
    CAPTURE(algo);
    CHECK(r.sum_rate <= best * (1 + 1e-12));
    CHECK(r.sum_rate > 0.0);
    CHECK(r.wall_seconds >= 0.0);
  }
  const AlgoRun h = run_algorithm("heuristic-drl", sys, 5, opts);
  const std::size_t full = run_algorithm("dqn", sys, 5, opts).action_count;
  CHECK(full == 16);
  CHECK(h.action_count < full);
  CHECK(h.action_count >= 5);  // ceil(0.3 * 16)
  CHECK(h.achieved_rho == doctest::Approx(1.0 - static_cast<double>(h.action_count) / 16.0));
  CHECK(h.reward.empty());
  opts.keep_log = true;
  CHECK(run_algorithm("dqn", sys, 5, opts).reward.size() == 300);
  CHECK_THROWS_AS(run_algorithm("annealing", sys, 5, opts), ConfigError);
}

TEST_CASE("sweep-elements outputs") {
  ExperimentConfig cfg;
  cfg.command = "sweep-elements";
  cfg.elements = {20};
  cfg.algos = {"exhaustive", "random", "greedy"};
  cfg.runs = 3;
  cfg.iterations = 200;
  cfg.out = scratch("sweep_serial");
  const auto summary = nlohmann::json::parse(run_experiment(cfg));
  CHECK(summary["artifact_version"] == kArtifactVersion);
  CHECK(fs::exists(cfg.out / "config.echo"));
  CHECK(slurp(cfg.out / "summary.json") == summary.dump(2) + "\n");

  SUBCASE("summary equals recomputation from the per-run CSVs") {
    for (const auto& algo : cfg.algos) {
      const auto t = read_csv(cfg.out / "curves" / (algo + "_sum_rate.csv"));
      CHECK(t.rows.size() == 3);
      CHECK(column(t, "seed") == std::vector<double>{0, 1, 2});
      const auto values = column(t, "sum_rate");
      double mean = (values[0] + values[1] + values[2]) / 3.0;
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean) / 2.0;
      const auto& s = summary["results"][algo]["20"]["sum_rate"];
      CHECK(s["n"] == 3);
      CHECK(s["mean"].get<double>() == doctest::Approx(mean).epsilon(1e-14));
      CHECK(s["stdev"].get<double>() == doctest::Approx(std::sqrt(var)).epsilon(1e-12));
    }
  }
  SUBCASE("jobs do not change any CSV byte") {
    ExperimentConfig par = cfg;
    par.jobs = 3;
    par.out = scratch("sweep_parallel");
    run_experiment(par);
    for (const auto& name : {"sweep_elements.csv", "curves/exhaustive_sum_rate.csv", "curves/random_sum_rate.csv",
                             "curves/greedy_sum_rate.csv"})
      CHECK(slurp(cfg.out / name) == slurp(par.out / name));
    fs::remove_all(par.out);
  }
  fs::remove_all(cfg.out);
}

TEST_CASE("convergence and reduction-sweep summaries are recomputable") {
  ExperimentConfig cfg;
  cfg.command = "convergence";
  cfg.elements = {20};
  cfg.runs = 2;
  cfg.iterations = 400;
  cfg.out = scratch("convergence");
  auto summary = nlohmann::json::parse(run_experiment(cfg));
  for (const auto& algo : {"dqn", "heuristic-drl"}) {
    const auto t = read_csv(cfg.out / "curves" / (std::string(algo) + "_reward.csv"));
    CHECK(t.rows.size() == 400);
    std::vector<double> to90, last;
    for (int k = 0; k < 2; ++k) {
      const auto r = column(t, "run_" + std::to_string(k));
      to90.push_back(static_cast<double>(iterations_to_fraction(r)));
      last.push_back(plateau(r));
    }
    const auto mean = column(t, "mean");
    const auto smooth = column(t, "smoothed_mean");
    CHECK(smooth == trailing_average(mean, 100));
    const auto& s = summary["results"][algo];
    CHECK(s["iterations_to_90"]["mean"].get<double>() == doctest::Approx(summarize(to90).mean));
    CHECK(s["last_1000_reward"]["mean"].get<double>() == doctest::Approx(summarize(last).mean).epsilon(1e-14));
  }
  fs::remove_all(cfg.out);

  cfg.command = "reduction-sweep";
  cfg.rho = {0.3, 0.9};
  cfg.iterations = 200;
  cfg.out = scratch("reduction");
  summary = nlohmann::json::parse(run_experiment(cfg));
  const auto t = read_csv(cfg.out / "curves" / "heuristic-drl_sum_rate_vs_rho.csv");
  CHECK(t.rows.size() == 4);
  for (std::size_t r = 0; r < 2; ++r) {
    const auto& entry = summary["results"]["heuristic-drl"][r];
    double sum = 0.0;
    for (const auto& row : t.rows)
      if (row[t.column("rho")] == entry["rho"].get<double>()) {
        sum += row[t.column("sum_rate")];
        CHECK(row[t.column("sum_rate")] <= row[t.column("exhaustive_sum_rate")] * (1 + 1e-12));
      }
    CHECK(entry["sum_rate"]["mean"].get<double>() == doctest::Approx(sum / 2.0).epsilon(1e-14));
  }
  fs::remove_all(cfg.out);
}

TEST_CASE("small commands") {
  ExperimentConfig cfg;
  cfg.runs = 2;
  SUBCASE("matching-demo") {
    cfg.command = "matching-demo";
    cfg.out = scratch("matching");
    const auto s = nlohmann::json::parse(run_experiment(cfg));
    CHECK(s["results"]["stable_runs"] == 2);
    const auto t = read_csv(cfg.out / "curves" / "matching_utility.csv");
    for (const auto& row : t.rows) CHECK(row[t.column("swap_utility")] <= row[t.column("brute_force_utility")] + 1e-12);
    const auto audit = read_csv(cfg.out / "curves" / "matching_audit.csv");
    for (double d : column(audit, "total_delta")) CHECK(d > 0.0);
  }
  SUBCASE("channel-stats") {
    cfg.command = "channel-stats";
    cfg.samples = 2000;
    cfg.out = scratch("channel");
    const auto s = nlohmann::json::parse(run_experiment(cfg));
    CHECK(s["results"]["samples"] == 2000);
    CHECK(read_csv(cfg.out / "curves" / "channel_stats.csv").rows.size() == 4);
  }
  SUBCASE("hierarchical with a fixed weight") {
    cfg.command = "hierarchical";
    cfg.elements = {20};
    cfg.horizon = 12;
    cfg.delta_steps = 2;
    cfg.power_weight = 0.0;
    cfg.out = scratch("hierarchical");
    const auto s = nlohmann::json::parse(run_experiment(cfg));
    CHECK(s["results"]["power_weight"] == 0.0);
    CHECK(!s["results"].contains("oracle_best_level"));
    CHECK(read_csv(cfg.out / "curves" / "hierarchical_log.csv").rows.size() == 24);
  }
  SUBCASE("supervised") {
    cfg.command = "supervised";
    cfg.runs = 1;
    cfg.rows = 200;
    cfg.out = scratch("supervised");
    const auto s = nlohmann::json::parse(run_experiment(cfg));
    const double ratio = s["results"]["test_rate_ratio"]["mean"].get<double>();
    CHECK(ratio > 0.0);
    CHECK(ratio <= 1.0 + 1e-12);
    CHECK(fs::exists(cfg.out / "datasets" / "run_0.csv"));
  }
  fs::remove_all(cfg.out);
}

TEST_CASE("unwritable output") {
  const auto file = scratch("blocker");
  std::ofstream(file) << "x";
  ExperimentConfig cfg;
  cfg.command = "channel-stats";
  cfg.samples = 10;
  cfg.out = file / "sub";
  CHECK_THROWS_AS(run_experiment(cfg), OutputError);
  fs::remove(file);
}

TEST_CASE("read_csv") {
  const auto dir = scratch("csv");
  fs::create_directories(dir);
  std::ofstream(dir / "a.csv") << "algo,x\nfoo,1.5\nbar,2\n";
  const auto t = read_csv(dir / "a.csv");
  CHECK(t.header == std::vector<std::string>{"algo", "x"});
  CHECK(column(t, "x") == std::vector<double>{1.5, 2.0});
  CHECK(std::isnan(t.rows[0][0]));
  CHECK_THROWS_AS(t.column("y"), std::out_of_range);
  std::ofstream(dir / "b.csv") << "a,b\n1\n";
  CHECK_THROWS_AS(read_csv(dir / "b.csv"), std::runtime_error);
  fs::remove_all(dir);
}
