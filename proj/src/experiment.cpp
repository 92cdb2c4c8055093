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

#include "ris/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "ris/heuristic_drl.hpp"
#include "ris/hierarchical.hpp"
#include "ris/matching.hpp"
#include "ris/metaheuristics.hpp"
#include "ris/search.hpp"
#include "ris/supervised.hpp"

namespace ris {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
  T x{};
  const auto s = trim(v);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError("invalid value for " + key + ": '" + v + "'");
  return x;
}

double parse_double(const std::string& key, const std::string& v) {
  const auto s = trim(v);
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("invalid value for " + key + ": '" + v + "'");
  }
  if (used != s.size() || !std::isfinite(x)) throw ConfigError("invalid value for " + key + ": '" + v + "'");
  return x;
}

// Shortest text that reads back to the same double.
std::string format_double(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string cell(double x) { return format_double(x); }
template <class T>
T&& cell(T&& x) {
  return std::forward<T>(x);
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << cell(v[i]);
  return os.str();
}

// Field accessors shared by set() and echo().
struct SystemField {
  const char* key;
  double SystemConfig::*real;
  std::size_t SystemConfig::*count;
};

const std::vector<SystemField>& system_fields() {
  static const std::vector<SystemField> fields{
      {"m_antennas", nullptr, &SystemConfig::m_antennas},
      {"k_users", nullptr, &SystemConfig::k_users},
      {"group_size", nullptr, &SystemConfig::group_size},
      {"phase_bits", nullptr, &SystemConfig::phase_bits},
      {"d_bs_ris", &SystemConfig::d_bs_ris, nullptr},
      {"d_ris_user_min", &SystemConfig::d_ris_user_min, nullptr},
      {"d_ris_user_max", &SystemConfig::d_ris_user_max, nullptr},
      {"rician_k", &SystemConfig::rician_k, nullptr},
      {"pathloss_exp_bs_ris", &SystemConfig::pathloss_exp_bs_ris, nullptr},
      {"pathloss_exp_ris_user", &SystemConfig::pathloss_exp_ris_user, nullptr},
      {"pathloss_ref_db", &SystemConfig::pathloss_ref_db, nullptr},
      {"tx_power_dbm", &SystemConfig::tx_power_dbm, nullptr},
      {"noise_dbm", &SystemConfig::noise_dbm, nullptr},
  };
  return fields;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : path_(path), out_(path) {
    if (!out_) throw OutputError("cannot write " + path.string());
    row(header);
  }
  template <class... Ts>
  void line(const Ts&... cells) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << cell(cells)), ...);
    out_ << '\n';
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  void row(const std::vector<double>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cell(cells[i]);
    out_ << '\n';
  }
  void close() {
    out_.close();
    if (!out_) throw OutputError("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  out.close();
  if (!out) throw OutputError("cannot write " + path.string());
}

json stats_json(const Stats& s) { return {{"n", s.n}, {"mean", s.mean}, {"stdev", s.stdev}}; }

RunOptions run_options(const ExperimentConfig& cfg, double rho) {
  RunOptions o;
  o.iterations = cfg.iterations;
  o.rho = rho;
  o.restarts = cfg.restarts;
  return o;
}

std::uint64_t replication_seed(const ExperimentConfig& cfg, std::size_t k) { return cfg.seed + k; }

// ---------------------------------------------------------------- commands

json cmd_sweep_elements(const ExperimentConfig& cfg) {
  const auto algos = cfg.resolved_algos();
  const auto elements = cfg.resolved_elements();
  const double rho = cfg.resolved_rho().front();
  struct Job {
    std::size_t algo, n, run;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < algos.size(); ++a)
    for (std::size_t n = 0; n < elements.size(); ++n)
      for (std::size_t k = 0; k < cfg.runs; ++k) jobs.push_back({a, n, k});
  std::vector<AlgoRun> results(jobs.size());
  parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
    const Job& j = jobs[i];
    results[i] = run_algorithm(algos[j.algo], cfg.system_for(elements[j.n]), replication_seed(cfg, j.run),
                               run_options(cfg, rho));
    results[i].run = j.run;
  });

  json summary = json::object();
  CsvWriter table(cfg.out / "sweep_elements.csv", {"algo", "elements", "runs", "mean_sum_rate", "stdev_sum_rate"});
  for (std::size_t a = 0; a < algos.size(); ++a) {
    CsvWriter curve(cfg.out / "curves" / (algos[a] + "_sum_rate.csv"), {"elements", "run", "seed", "sum_rate"});
    json per_n = json::object();
    for (std::size_t n = 0; n < elements.size(); ++n) {
      std::vector<double> values;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (jobs[i].algo != a || jobs[i].n != n) continue;
        curve.line(elements[n], results[i].run, results[i].seed, results[i].sum_rate);
        values.push_back(results[i].sum_rate);
      }
      const Stats s = summarize(values);
      table.line(algos[a], elements[n], s.n, s.mean, s.stdev);
      per_n[std::to_string(elements[n])] = {{"sum_rate", stats_json(s)}};
    }
    curve.close();
    summary[algos[a]] = per_n;
  }
  table.close();
  return summary;
}

json cmd_convergence(const ExperimentConfig& cfg) {
  const auto algos = cfg.resolved_algos();
  const std::size_t n_el = cfg.resolved_elements().front();
  const double rho = cfg.resolved_rho().front();
  std::vector<AlgoRun> results(algos.size() * cfg.runs);
  parallel_for(results.size(), cfg.jobs, [&](std::size_t i) {
    RunOptions o = run_options(cfg, rho);
    o.keep_log = true;
    results[i] = run_algorithm(algos[i / cfg.runs], cfg.system_for(n_el), replication_seed(cfg, i % cfg.runs), o);
    results[i].run = i % cfg.runs;
  });

  json summary = json::object();
  for (std::size_t a = 0; a < algos.size(); ++a) {
    const AlgoRun* runs = &results[a * cfg.runs];
    const std::size_t T = runs[0].reward.size();
    if (T == 0) throw ConfigError("convergence: algorithm '" + algos[a] + "' has no reward curve");
    std::vector<double> mean(T, 0.0);
    for (std::size_t k = 0; k < cfg.runs; ++k)
      for (std::size_t t = 0; t < T; ++t) mean[t] += runs[k].reward[t] / static_cast<double>(cfg.runs);
    const auto smooth = trailing_average(mean, 100);
    std::vector<std::string> header{"iteration"};
    for (std::size_t k = 0; k < cfg.runs; ++k) header.push_back("run_" + std::to_string(k));
    header.push_back("mean");
    header.push_back("smoothed_mean");
    CsvWriter curve(cfg.out / "curves" / (algos[a] + "_reward.csv"), header);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> row{static_cast<double>(t + 1)};
      for (std::size_t k = 0; k < cfg.runs; ++k) row.push_back(runs[k].reward[t]);
      row.push_back(mean[t]);
      row.push_back(smooth[t]);
      curve.row(row);
    }
    curve.close();
    std::vector<double> to90, last;
    for (std::size_t k = 0; k < cfg.runs; ++k) {
      to90.push_back(static_cast<double>(iterations_to_fraction(runs[k].reward)));
      last.push_back(plateau(runs[k].reward));
    }
    summary[algos[a]] = {{"elements", n_el},
                         {"iterations_to_90", stats_json(summarize(to90))},
                         {"last_1000_reward", stats_json(summarize(last))}};
  }
  return summary;
}

json cmd_runtime(const ExperimentConfig& cfg) {
  const auto algos = cfg.resolved_algos();
  const std::size_t n_el = cfg.resolved_elements().front();
  const double rho = cfg.resolved_rho().front();
  json summary = json::object();
  std::map<std::string, double> means;
  // Serial on purpose: concurrent runs would share the core being timed.
  for (const auto& algo : algos) {
    CsvWriter curve(cfg.out / "curves" / (algo + "_wall_seconds.csv"),
                    {"run", "seed", "wall_seconds", "pre_run_seconds", "evaluations"});
    std::vector<double> walls, pre;
    for (std::size_t k = 0; k < cfg.runs; ++k) {
      const AlgoRun r = run_algorithm(algo, cfg.system_for(n_el), replication_seed(cfg, k), run_options(cfg, rho));
      curve.line(k, r.seed, r.wall_seconds, r.pre_run_seconds, r.evaluations);
      walls.push_back(r.wall_seconds);
      pre.push_back(r.pre_run_seconds);
    }
    curve.close();
    means[algo] = summarize(walls).mean;
    summary[algo] = {{"elements", n_el},
                     {"wall_seconds", stats_json(summarize(walls))},
                     {"pre_run_wall_seconds", stats_json(summarize(pre))}};
  }
  if (means.count("dqn") && means["dqn"] > 0.0)
    for (const auto& [algo, m] : means) summary[algo]["wall_seconds_ratio_to_dqn"] = m / means["dqn"];
  summary["serial"] = true;
  return summary;
}

json cmd_reduction_sweep(const ExperimentConfig& cfg) {
  const std::size_t n_el = cfg.resolved_elements().front();
  const auto rhos = cfg.resolved_rho();
  const SystemConfig sys = cfg.system_for(n_el);
  std::vector<AlgoRun> results(rhos.size() * cfg.runs);
  std::vector<double> exhaustive(cfg.runs);
  parallel_for(cfg.runs, cfg.jobs, [&](std::size_t k) {
    exhaustive[k] = exhaustive_search(experiment_channel(sys, replication_seed(cfg, k)), sys).best_value;
  });
  parallel_for(results.size(), cfg.jobs, [&](std::size_t i) {
    results[i] = run_algorithm("heuristic-drl", sys, replication_seed(cfg, i % cfg.runs), run_options(cfg, rhos[i / cfg.runs]));
    results[i].run = i % cfg.runs;
  });
  CsvWriter curve(cfg.out / "curves" / "heuristic-drl_sum_rate_vs_rho.csv",
                  {"rho", "run", "seed", "achieved_rho", "action_count", "sum_rate", "exhaustive_sum_rate"});
  json per_rho = json::array();
  for (std::size_t r = 0; r < rhos.size(); ++r) {
    std::vector<double> values, achieved;
    for (std::size_t k = 0; k < cfg.runs; ++k) {
      const AlgoRun& x = results[r * cfg.runs + k];
      curve.line(rhos[r], k, x.seed, x.achieved_rho, x.action_count, x.sum_rate, exhaustive[k]);
      values.push_back(x.sum_rate);
      achieved.push_back(x.achieved_rho);
    }
    per_rho.push_back({{"rho", rhos[r]},
                       {"achieved_rho", stats_json(summarize(achieved))},
                       {"sum_rate", stats_json(summarize(values))}});
  }
  curve.close();
  return {{"elements", n_el}, {"exhaustive_sum_rate", stats_json(summarize(exhaustive))}, {"heuristic-drl", per_rho}};
}

json cmd_matching_demo(const ExperimentConfig& cfg) {
  struct Row {
    double swap = 0, brute = 0, first_fit = 0;
    std::size_t rounds = 0;
    std::vector<SwapRecord> audit;
    bool stable = false;
  };
  std::vector<Row> rows(cfg.runs);
  parallel_for(cfg.runs, cfg.jobs, [&](std::size_t k) {
    const std::uint64_t seed = replication_seed(cfg, k);
    Rng irng = derive_rng(seed, "matching-instance");
    const auto inst = random_power_sharing_instance(6, 3, {2, 2, 2}, irng);
    const Matching init = first_fit_matching(inst);
    Rng srng = derive_rng(seed, "matching");
    const auto res = swap_matching(inst, init, 1000, srng);
    Row& r = rows[k];
    r.swap = res.total_utility;
    r.brute = inst.total_utility(brute_force_matching(inst).assignment);
    r.first_fit = inst.total_utility(init.assignment);
    r.rounds = res.rounds;
    r.audit = res.audit;
    r.stable = true;
    for (std::size_t u = 0; u < inst.n_left; ++u)
      for (std::size_t v = u + 1; v < inst.n_left; ++v)
        r.stable = r.stable && !swap_acceptable(inst, res.matching.assignment, u, v);
  });
  CsvWriter curve(cfg.out / "curves" / "matching_utility.csv",
                  {"run", "seed", "swap_utility", "brute_force_utility", "first_fit_utility", "rounds", "swaps", "stable"});
  CsvWriter audit(cfg.out / "curves" / "matching_audit.csv",
                  {"run", "round", "user_a", "user_b", "resource_a", "resource_b", "total_delta"});
  std::vector<double> ratio;
  std::size_t stable = 0;
  for (std::size_t k = 0; k < cfg.runs; ++k) {
    const Row& r = rows[k];
    curve.line(k, replication_seed(cfg, k), r.swap, r.brute, r.first_fit, r.rounds, r.audit.size(), r.stable ? 1 : 0);
    for (const auto& e : r.audit)
      audit.line(k, e.round, e.user_a, e.user_b, e.resource_a, e.resource_b, e.total_delta);
    ratio.push_back(r.swap / r.brute);
    stable += r.stable;
  }
  curve.close();
  audit.close();
  return {{"users", 6}, {"resources", 3}, {"stable_runs", stable}, {"utility_ratio_to_brute_force", stats_json(summarize(ratio))}};
}

json cmd_supervised(const ExperimentConfig& cfg) {
  const std::size_t n_el = cfg.resolved_elements().front();
  const SystemConfig sys = cfg.system_for(n_el);
  const Labeler labeler = labeler_from_string(cfg.labeler);
  std::filesystem::create_directories(cfg.out / "datasets");
  struct Out {
    SupervisedMetrics cls, reg;
    TrainResult train;
  };
  std::vector<Out> outs(cfg.runs);
  parallel_for(cfg.runs, cfg.jobs, [&](std::size_t k) {
    const std::uint64_t seed = replication_seed(cfg, k);
    Rng drng = derive_rng(seed, "dataset");
    Dataset ds = generate_dataset(sys, cfg.rows, labeler, drng);
    Rng trng = derive_rng(seed, "train");
    outs[k].train = train_supervised(ds, Task::classification, TrainOptions{}, trng);
    outs[k].cls = evaluate_supervised(outs[k].train.model, ds, outs[k].train.split.test);
    Rng rrng = derive_rng(seed, "train-regression");
    const TrainResult reg = train_supervised(ds, Task::regression, TrainOptions{}, rrng);
    outs[k].reg = evaluate_supervised(reg.model, ds, reg.split.test);
    ds.standardization = outs[k].train.model.standardization;
    ds.save(cfg.out / "datasets" / ("run_" + std::to_string(k) + ".csv"));
  });
  CsvWriter loss(cfg.out / "curves" / "supervised_loss.csv",
                 {"run", "epoch", "train_loss", "validation_loss", "train_accuracy"});
  CsvWriter metrics(cfg.out / "curves" / "supervised_metrics.csv", {"run", "seed", "top1", "rate_ratio", "rmse"});
  std::vector<double> top1, ratio, rmse;
  for (std::size_t k = 0; k < cfg.runs; ++k) {
    const Out& o = outs[k];
    for (std::size_t e = 0; e < o.train.train_loss.size(); ++e)
      loss.line(k, e, o.train.train_loss[e], o.train.validation_loss[e], o.train.train_accuracy[e]);
    metrics.line(k, replication_seed(cfg, k), *o.cls.top1, *o.cls.rate_ratio, *o.reg.rmse);
    top1.push_back(*o.cls.top1);
    ratio.push_back(*o.cls.rate_ratio);
    rmse.push_back(*o.reg.rmse);
  }
  loss.close();
  metrics.close();
  return {{"elements", n_el},
          {"labeler", cfg.labeler},
          {"rows", cfg.rows},
          {"test_top1", stats_json(summarize(top1))},
          {"test_rate_ratio", stats_json(summarize(ratio))},
          {"test_rate_rmse", stats_json(summarize(rmse))}};
}

json cmd_hierarchical(const ExperimentConfig& cfg) {
  const std::size_t n_el = cfg.resolved_elements().front();
  const SystemConfig sys = cfg.system_for(n_el);
  HierarchicalConfig h;
  h.horizon = cfg.horizon;
  h.delta_steps = cfg.delta_steps;
  json summary = json::object();
  std::optional<std::size_t> best_level;
  if (cfg.power_weight) {
    h.power_weight = *cfg.power_weight;
  } else {
    Rng cal = derive_rng(cfg.seed, "calibration");
    const auto rates = mean_rate_per_level(sys, h, 100, cal);
    h.power_weight = calibrate_power_weight(rates, h.power_levels_dbm);
    Rng orc = derive_rng(cfg.seed, "calibration-oracle");
    const auto check = mean_rate_per_level(sys, h, 100, orc);
    std::vector<double> reward;
    for (std::size_t i = 0; i < check.size(); ++i)
      reward.push_back(check[i] - h.power_weight * dbm_to_watts(h.power_levels_dbm[i]));
    best_level = static_cast<std::size_t>(std::max_element(reward.begin(), reward.end()) - reward.begin());
    summary["calibration_mean_rates"] = rates;
    summary["oracle_mean_rewards"] = reward;
    summary["oracle_best_level"] = *best_level;
  }
  summary["power_weight"] = h.power_weight;
  summary["power_levels_dbm"] = h.power_levels_dbm;

  std::vector<HierarchicalLog> logs(cfg.runs);
  parallel_for(cfg.runs, cfg.jobs, [&](std::size_t k) {
    Rng rng = derive_rng(replication_seed(cfg, k), "hierarchical");
    logs[k] = hierarchical_run(sys, h, rng);
  });
  CsvWriter curve(cfg.out / "curves" / "hierarchical_log.csv",
                  {"run", "meta_step", "level", "power_dbm", "mean_rate", "reward", "explored"});
  std::vector<std::size_t> policies;
  std::vector<double> mean_reward;
  for (std::size_t k = 0; k < cfg.runs; ++k) {
    double sum = 0.0;
    for (std::size_t m = 0; m < logs[k].steps.size(); ++m) {
      const auto& s = logs[k].steps[m];
      curve.line(k, m, s.level, s.power_dbm, s.mean_rate, s.reward, s.explored ? 1 : 0);
      sum += s.reward;
    }
    policies.push_back(logs[k].policy_level);
    mean_reward.push_back(sum / static_cast<double>(logs[k].steps.size()));
  }
  curve.close();
  summary["policy_level"] = policies;
  summary["meta_reward"] = stats_json(summarize(mean_reward));
  if (best_level)
    summary["runs_matching_oracle"] = std::count(policies.begin(), policies.end(), *best_level);
  return summary;
}

json cmd_channel_stats(const ExperimentConfig& cfg) {
  const SystemConfig sys = cfg.system_for(cfg.resolved_elements().front());
  SystemConfig seeded = sys;
  seeded.seed = cfg.seed;
  const ChannelStats s = channel_stats(seeded, cfg.samples);
  CsvWriter curve(cfg.out / "curves" / "channel_stats.csv", {"quantity", "measured", "expected", "relative_error"});
  auto row = [&](const char* name, double measured, double expected) {
    curve.line(name, measured, expected, std::abs(measured - expected) / expected);
  };
  row("power_bs_ris", s.mean_power_bs_ris, s.expected_power_bs_ris);
  row("power_ris_user", s.mean_power_ris_user, s.expected_power_ris_user);
  row("k_factor_bs_ris", s.k_factor_bs_ris, sys.rician_k);
  row("k_factor_ris_user", s.k_factor_ris_user, sys.rician_k);
  curve.close();
  return {{"samples", s.samples},
          {"mean_power_bs_ris", s.mean_power_bs_ris},
          {"expected_power_bs_ris", s.expected_power_bs_ris},
          {"mean_power_ris_user", s.mean_power_ris_user},
          {"expected_power_ris_user", s.expected_power_ris_user},
          {"k_factor_bs_ris", s.k_factor_bs_ris},
          {"k_factor_ris_user", s.k_factor_ris_user},
          {"configured_k_factor", sys.rician_k}};
}

}  // namespace

// ---------------------------------------------------------------- config

const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> c{"sweep-elements", "convergence",  "runtime",      "reduction-sweep",
                                          "matching-demo",  "supervised",   "hierarchical", "channel-stats"};
  return c;
}

const std::vector<std::string>& known_algorithms() {
  static const std::vector<std::string> a{"exhaustive", "random", "greedy", "local", "pso",
                                          "ga",         "tabu",   "dqn",    "heuristic-drl"};
  return a;
}

void ExperimentConfig::set(const std::string& raw_key, const std::string& value) {
  const std::string key = trim(raw_key);
  if (key == "command") command = trim(value);
  else if (key == "seed") seed = parse_unsigned<std::uint64_t>(key, value);
  else if (key == "runs") runs = parse_unsigned<std::size_t>(key, value);
  else if (key == "jobs") jobs = parse_unsigned<std::size_t>(key, value);
  else if (key == "iterations") iterations = parse_unsigned<std::size_t>(key, value);
  else if (key == "restarts") restarts = parse_unsigned<std::size_t>(key, value);
  else if (key == "rows") rows = parse_unsigned<std::size_t>(key, value);
  else if (key == "horizon") horizon = parse_unsigned<std::size_t>(key, value);
  else if (key == "delta_steps") delta_steps = parse_unsigned<std::size_t>(key, value);
  else if (key == "samples") samples = parse_unsigned<std::size_t>(key, value);
  else if (key == "out") out = trim(value);
  else if (key == "labeler") labeler = trim(value);
  else if (key == "algos") algos = split_list(value);
  else if (key == "elements") {
    elements.clear();
    for (const auto& e : split_list(value)) elements.push_back(parse_unsigned<std::size_t>(key, e));
  } else if (key == "rho") {
    rho.clear();
    for (const auto& e : split_list(value)) rho.push_back(parse_double(key, e));
  } else if (key == "power_weight") {
    if (trim(value) == "calibrate") power_weight.reset();
    else power_weight = parse_double(key, value);
  } else {
    for (const auto& f : system_fields()) {
      if (key != f.key) continue;
      if (f.real) system.*f.real = parse_double(key, value);
      else system.*f.count = parse_unsigned<std::size_t>(key, value);
      return;
    }
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

void ExperimentConfig::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

std::vector<std::string> ExperimentConfig::resolved_algos() const {
  if (!algos.empty()) return algos;
  if (command == "convergence") return {"dqn", "heuristic-drl"};
  if (command == "runtime") return {"exhaustive", "greedy", "dqn", "heuristic-drl"};
  if (command == "reduction-sweep") return {"heuristic-drl"};
  return {"exhaustive", "random", "dqn", "heuristic-drl"};
}

std::vector<std::size_t> ExperimentConfig::resolved_elements() const {
  if (!elements.empty()) return elements;
  if (command == "sweep-elements") return {20, 30, 40};
  if (command == "supervised") return {20};
  return {40};
}

std::vector<double> ExperimentConfig::resolved_rho() const {
  if (!rho.empty()) return rho;
  if (command == "reduction-sweep") return {0.1, 0.3, 0.5, 0.7, 0.9, 0.95};
  return {0.7};
}

SystemConfig ExperimentConfig::system_for(std::size_t n_elements) const {
  SystemConfig s = system;
  s.n_elements = n_elements;
  return s;
}

void ExperimentConfig::validate() const {
  const auto& cmds = known_commands();
  if (std::find(cmds.begin(), cmds.end(), command) == cmds.end())
    throw UnknownCommandError("unknown command '" + command + "'");
  if (runs == 0) throw ConfigError("runs must be >= 1");
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
  if (iterations == 0) throw ConfigError("iterations must be >= 1");
  if (restarts == 0) throw ConfigError("restarts must be >= 1");
  if (horizon == 0 || delta_steps == 0) throw ConfigError("horizon and delta_steps must be >= 1");
  if (samples == 0) throw ConfigError("samples must be >= 1");
  if (rows < 10) throw ConfigError("rows must be >= 10");
  if (power_weight && *power_weight < 0.0) throw ConfigError("power_weight must be >= 0");
  const auto& known = known_algorithms();
  for (const auto& a : resolved_algos())
    if (std::find(known.begin(), known.end(), a) == known.end()) throw ConfigError("unknown algorithm '" + a + "'");
  for (double r : resolved_rho())
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("rho must be in [0, 1)");
  try {
    labeler_from_string(labeler);
    for (std::size_t n : resolved_elements()) system_for(n).validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

std::string ExperimentConfig::echo() const {
  std::map<std::string, std::string> kv;
  kv["command"] = command;
  kv["seed"] = std::to_string(seed);
  kv["runs"] = std::to_string(runs);
  kv["jobs"] = std::to_string(jobs);
  kv["iterations"] = std::to_string(iterations);
  kv["restarts"] = std::to_string(restarts);
  kv["rows"] = std::to_string(rows);
  kv["horizon"] = std::to_string(horizon);
  kv["delta_steps"] = std::to_string(delta_steps);
  kv["samples"] = std::to_string(samples);
  kv["out"] = out.string();
  kv["labeler"] = labeler;
  kv["algos"] = join(resolved_algos());
  kv["elements"] = join(resolved_elements());
  kv["rho"] = join(resolved_rho());
  kv["power_weight"] = power_weight ? format_double(*power_weight) : "calibrate";
  for (const auto& f : system_fields())
    kv[f.key] = f.real ? format_double(system.*f.real) : std::to_string(system.*f.count);
  std::ostringstream os;
  for (const auto& [k, v] : kv) os << k << '=' << v << '\n';
  return os.str();
}

// ---------------------------------------------------------------- runs

ChannelRealization experiment_channel(const SystemConfig& cfg, std::uint64_t seed) {
  Rng rng = derive_rng(seed, "channel");
  return sample_channels(cfg, rng);
}

AlgoRun run_algorithm(const std::string& algo, const SystemConfig& cfg, std::uint64_t seed, const RunOptions& options) {
  const ChannelRealization real = experiment_channel(cfg, seed);
  AlgoRun r;
  r.algo = algo;
  r.elements = cfg.n_elements;
  r.seed = seed;
  const PhaseConfig zeros(cfg.groups(), 0);
  const auto t0 = Clock::now();
  auto from_search = [&](const SearchResult& s) {
    r.sum_rate = s.best_value;
    r.evaluations = s.evaluations;
  };
  if (algo == "exhaustive") {
    from_search(exhaustive_search(real, cfg));
  } else if (algo == "random") {
    SumRateObjective obj(real, cfg);
    Rng rng = derive_rng(seed, "random");
    double sum = 0.0;
    for (std::size_t i = 0; i < options.iterations; ++i) sum += obj(random_config(cfg.groups(), cfg.levels(), rng));
    r.sum_rate = sum / static_cast<double>(options.iterations);
    r.evaluations = options.iterations;
  } else if (algo == "greedy") {
    from_search(greedy_elementwise(real, cfg));
  } else if (algo == "local") {
    from_search(local_search(real, cfg, zeros));
  } else if (algo == "pso") {
    Rng rng = derive_rng(seed, "pso");
    from_search(pso(real, cfg, PsoParams{}, rng));
  } else if (algo == "ga") {
    Rng rng = derive_rng(seed, "ga");
    from_search(ga(real, cfg, GaParams{}, rng));
  } else if (algo == "tabu") {
    from_search(tabu(real, cfg, TabuParams{}, zeros));
  } else if (algo == "dqn") {
    PhaseEnv env(real, cfg);
    Rng rng = derive_rng(seed, "dqn");
    TrainLog log = dqn_train(env, options.dqn, options.iterations, rng);
    r.sum_rate = log.final_value;
    r.evaluations = env.evaluations();
    r.action_count = env.num_actions();
    if (options.keep_log) r.reward = std::move(log.raw_value);
  } else if (algo == "heuristic-drl") {
    HeuristicDrlConfig h;
    h.target_rho = options.rho;
    h.restarts = options.restarts;
    h.dqn = options.dqn;
    Rng rng = derive_rng(seed, "heuristic-drl");
    HeuristicDrlRun run = heuristic_drl_run(real, cfg, h, options.iterations, rng);
    r.sum_rate = run.log.final_value;
    r.pre_run_seconds = run.pre_run_seconds;
    r.evaluations = run.reduced.pre_run_evaluations + options.iterations;
    r.action_count = run.reduced.joint_size();
    r.achieved_rho = run.reduced.reduction_ratio();
    if (options.keep_log) r.reward = std::move(run.log.raw_value);
  } else {
    throw ConfigError("unknown algorithm '" + algo + "'");
  }
  r.wall_seconds = seconds_since(t0);
  return r;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= n || error) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------- statistics

Stats summarize(const std::vector<double>& values) {
  Stats s;
  s.n = values.size();
  if (s.n == 0) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double q = 0.0;
    for (double v : values) q += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(q / static_cast<double>(s.n - 1));
  }
  return s;
}

std::vector<double> trailing_average(const std::vector<double>& x, std::size_t window) {
  if (window == 0) throw std::invalid_argument("trailing_average: window must be >= 1");
  std::vector<double> out(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sum += x[i];
    if (i >= window) sum -= x[i - window];
    out[i] = sum / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

double plateau(const std::vector<double>& x, std::size_t last) {
  if (x.empty()) return 0.0;
  const std::size_t n = std::min(last, x.size());
  double s = 0.0;
  for (std::size_t i = x.size() - n; i < x.size(); ++i) s += x[i];
  return s / static_cast<double>(n);
}

std::size_t iterations_to_fraction(const std::vector<double>& reward, double fraction, std::size_t window,
                                   std::size_t last) {
  const double target = fraction * plateau(reward, last);
  const auto smooth = trailing_average(reward, window);
  // Partial windows at the start are too noisy to count as reaching anything.
  for (std::size_t i = window - 1; i < smooth.size(); ++i)
    if (smooth[i] >= target) return i + 1;
  return reward.size() + 1;
}

// ---------------------------------------------------------------- driver

std::string run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  try {
    std::filesystem::create_directories(cfg.out / "curves");
  } catch (const std::filesystem::filesystem_error& e) {
    throw OutputError("cannot create output directory " + cfg.out.string() + ": " + e.what());
  }
  write_text(cfg.out / "config.echo", cfg.echo());

  const auto t0 = Clock::now();
  json results;
  if (cfg.command == "sweep-elements") results = cmd_sweep_elements(cfg);
  else if (cfg.command == "convergence") results = cmd_convergence(cfg);
  else if (cfg.command == "runtime") results = cmd_runtime(cfg);
  else if (cfg.command == "reduction-sweep") results = cmd_reduction_sweep(cfg);
  else if (cfg.command == "matching-demo") results = cmd_matching_demo(cfg);
  else if (cfg.command == "supervised") results = cmd_supervised(cfg);
  else if (cfg.command == "hierarchical") results = cmd_hierarchical(cfg);
  else results = cmd_channel_stats(cfg);

  json config = json::object();
  std::istringstream echo(cfg.echo());
  for (std::string line; std::getline(echo, line);) {
    const auto eq = line.find('=');
    config[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const json summary{{"artifact_version", kArtifactVersion},
                     {"command", cfg.command},
                     {"config", config},
                     {"results", results},
                     {"total_wall_seconds", seconds_since(t0)}};
  const std::string text = summary.dump(2) + "\n";
  write_text(cfg.out / "summary.json", text);
  return text;
}

// ---------------------------------------------------------------- CSV input

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::out_of_range("no column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty CSV " + path.string());
  t.header = split_list(line);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        row.push_back(std::nan(""));  // non-numeric cell, e.g. an algorithm name
      }
    }
    if (row.size() != t.header.size()) throw std::runtime_error("ragged CSV row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace ris
