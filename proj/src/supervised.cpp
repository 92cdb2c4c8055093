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

#include "ris/supervised.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace ris {

namespace {

constexpr const char* kSchema = "ris-dataset/1";

nlohmann::json system_to_json(const SystemConfig& c) {
  return {{"m_antennas", c.m_antennas},
          {"k_users", c.k_users},
          {"n_elements", c.n_elements},
          {"group_size", c.group_size},
          {"phase_bits", c.phase_bits},
          {"d_bs_ris", c.d_bs_ris},
          {"d_ris_user_min", c.d_ris_user_min},
          {"d_ris_user_max", c.d_ris_user_max},
          {"rician_k", c.rician_k},
          {"pathloss_exp_bs_ris", c.pathloss_exp_bs_ris},
          {"pathloss_exp_ris_user", c.pathloss_exp_ris_user},
          {"pathloss_ref_db", c.pathloss_ref_db},
          {"tx_power_dbm", c.tx_power_dbm},
          {"noise_dbm", c.noise_dbm},
          {"seed", c.seed}};
}

SystemConfig system_from_json(const nlohmann::json& j) {
  SystemConfig c;
  j.at("m_antennas").get_to(c.m_antennas);
  j.at("k_users").get_to(c.k_users);
  j.at("n_elements").get_to(c.n_elements);
  j.at("group_size").get_to(c.group_size);
  j.at("phase_bits").get_to(c.phase_bits);
  j.at("d_bs_ris").get_to(c.d_bs_ris);
  j.at("d_ris_user_min").get_to(c.d_ris_user_min);
  j.at("d_ris_user_max").get_to(c.d_ris_user_max);
  j.at("rician_k").get_to(c.rician_k);
  j.at("pathloss_exp_bs_ris").get_to(c.pathloss_exp_bs_ris);
  j.at("pathloss_exp_ris_user").get_to(c.pathloss_exp_ris_user);
  j.at("pathloss_ref_db").get_to(c.pathloss_ref_db);
  j.at("tx_power_dbm").get_to(c.tx_power_dbm);
  j.at("noise_dbm").get_to(c.noise_dbm);
  j.at("seed").get_to(c.seed);
  c.validate();
  return c;
}

Eigen::MatrixXd feature_matrix(const Dataset& ds, const Standardization& st, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(ds.feature_size()), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const auto f = st.apply(ds.rows[rows[c]].features);
    x.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(f.data(), x.rows());
  }
  return x;
}

// Column-wise log-softmax, stabilised by the column max.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = logits;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double m = out.col(c).maxCoeff();
    const double lse = m + std::log((out.col(c).array() - m).exp().sum());
    out.col(c).array() -= lse;
  }
  return out;
}

struct BatchLoss {
  double loss = 0.0;  // summed over the batch
  std::size_t correct = 0;
  Eigen::MatrixXd grad;  // d(mean loss)/d(outputs)
};

BatchLoss batch_loss(Task task, const Eigen::MatrixXd& out, const std::vector<double>& targets) {
  BatchLoss b;
  const auto n = static_cast<double>(out.cols());
  if (task == Task::classification) {
    const Eigen::MatrixXd lp = log_softmax(out);
    b.grad = lp.array().exp() / n;
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const auto y = static_cast<Eigen::Index>(targets[static_cast<std::size_t>(c)]);
      b.loss -= lp(y, c);
      b.grad(y, c) -= 1.0 / n;
      Eigen::Index arg = 0;
      out.col(c).maxCoeff(&arg);
      b.correct += arg == y;
    }
  } else {
    b.grad.resize(1, out.cols());
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const double e = out(0, c) - targets[static_cast<std::size_t>(c)];
      b.loss += e * e;
      b.grad(0, c) = 2.0 * e / n;
    }
  }
  return b;
}

}  // namespace

std::string to_string(Labeler labeler) {
  switch (labeler) {
    case Labeler::greedy: return "greedy";
    case Labeler::tabu: return "tabu";
    case Labeler::exhaustive: return "exhaustive";
  }
  return "unknown";
}

Labeler labeler_from_string(const std::string& name) {
  if (name == "greedy") return Labeler::greedy;
  if (name == "tabu") return Labeler::tabu;
  if (name == "exhaustive") return Labeler::exhaustive;
  throw std::invalid_argument("unknown labeler '" + name + "'");
}

PhaseConfig canonical_rotation(const PhaseConfig& cfg, int levels) {
  PhaseConfig out = cfg;
  if (out.size() == 0) return out;
  const int shift = out[0];
  for (auto& q : out.indices) q = ((q - shift) % levels + levels) % levels;
  return out;
}

// ---------------------------------------------------------------- dataset

Standardization Standardization::fit(const std::vector<DatasetRow>& rows, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw std::invalid_argument("Standardization::fit: no rows");
  const std::size_t d = rows.at(indices.front()).features.size();
  Standardization s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (auto i : indices)
    for (std::size_t k = 0; k < d; ++k) s.mean[k] += rows[i].features[k];
  for (auto& m : s.mean) m /= static_cast<double>(indices.size());
  for (auto i : indices)
    for (std::size_t k = 0; k < d; ++k) s.scale[k] += std::pow(rows[i].features[k] - s.mean[k], 2);
  for (auto& v : s.scale) {
    v = std::sqrt(v / static_cast<double>(indices.size()));
    if (!(v > 0.0)) v = 1.0;
  }
  return s;
}

std::vector<double> Standardization::apply(const std::vector<double>& x) const {
  if (x.size() != mean.size()) throw DimensionError("Standardization::apply: width mismatch");
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = (x[k] - mean[k]) / scale[k];
  return out;
}

ChannelRealization Dataset::realization(std::size_t row) const {
  Rng rng = derive_rng(rows.at(row).channel_seed, "channel");
  return sample_channels(cfg, rng);
}

void Dataset::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  nlohmann::json header{{"schema", kSchema},
                        {"labeler", to_string(labeler)},
                        {"rows", rows.size()},
                        {"feature_size", feature_size()},
                        {"system", system_to_json(cfg)},
                        {"generation_seconds", generation_seconds},
                        {"evaluations", evaluations}};
  if (standardization)
    header["standardization"] = {{"mean", standardization->mean}, {"scale", standardization->scale}};
  out << header.dump() << '\n';
  out << "channel_seed,label_rank,label_rate";
  for (std::size_t k = 0; k < feature_size(); ++k) out << ",f" << k;
  out << '\n';
  out.precision(17);
  for (const auto& r : rows) {
    out << r.channel_seed << ',' << config_rank(r.label, cfg.levels()) << ',' << r.label_rate;
    for (double f : r.features) out << ',' << f;
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Dataset Dataset::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  if (header.at("schema") != kSchema) throw std::runtime_error("unsupported dataset schema");
  Dataset ds;
  ds.cfg = system_from_json(header.at("system"));
  ds.labeler = labeler_from_string(header.at("labeler").get<std::string>());
  header.at("generation_seconds").get_to(ds.generation_seconds);
  header.at("evaluations").get_to(ds.evaluations);
  if (header.contains("standardization")) {
    Standardization s;
    header["standardization"].at("mean").get_to(s.mean);
    header["standardization"].at("scale").get_to(s.scale);
    ds.standardization = std::move(s);
  }
  const auto width = header.at("feature_size").get<std::size_t>();
  std::getline(in, line);  // column names
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 3 + width) throw std::runtime_error("malformed dataset row in " + path.string());
    DatasetRow r;
    r.channel_seed = std::stoull(cells[0]);
    r.label = config_from_rank(std::stoull(cells[1]), ds.cfg.groups(), ds.cfg.levels());
    r.label_rate = std::stod(cells[2]);
    for (std::size_t k = 0; k < width; ++k) r.features.push_back(std::stod(cells[3 + k]));
    ds.rows.push_back(std::move(r));
  }
  if (ds.rows.size() != header.at("rows").get<std::size_t>())
    throw std::runtime_error("row count mismatch in " + path.string());
  return ds;
}

Dataset generate_dataset(const SystemConfig& cfg, std::size_t n_rows, Labeler labeler, Rng& rng,
                         const LabelerOptions& options) {
  cfg.validate();
  if (n_rows == 0) throw std::invalid_argument("generate_dataset: n_rows must be >= 1");
  if (labeler == Labeler::exhaustive && space_size(cfg.groups(), cfg.levels()) > options.exhaustive_cap)
    throw SpaceTooLargeError("generate_dataset: exhaustive labelling exceeds the cap");

  Dataset ds;
  ds.cfg = cfg;
  ds.labeler = labeler;
  ds.rows.reserve(n_rows);
  const PhaseConfig zeros(cfg.groups(), 0);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < n_rows; ++i) {
    DatasetRow row;
    row.channel_seed = rng();
    Rng ch = derive_rng(row.channel_seed, "channel");
    const ChannelRealization real = sample_channels(cfg, ch);
    SumRateObjective obj(real, cfg);
    SearchResult res;
    switch (labeler) {
      case Labeler::greedy:
        res = greedy_elementwise(obj, zeros, identity_order(cfg.groups()), options.greedy_sweeps);
        break;
      case Labeler::tabu: res = tabu(obj, options.tabu, zeros); break;
      case Labeler::exhaustive: res = exhaustive_search(obj, options.exhaustive_cap); break;
    }
    ds.evaluations += obj.evaluations();
    row.label = canonical_rotation(res.best_config, cfg.levels());
    row.label_rate = sum_rate(real, row.label, cfg).sum_rate;
    row.features = relative_channel_features(real, cfg);
    ds.rows.push_back(std::move(row));
  }
  ds.generation_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return ds;
}

DataSplit split_dataset(std::size_t n_rows, Rng& rng) {
  std::vector<std::size_t> order(n_rows);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t tenth = n_rows / 10;
  DataSplit s;
  s.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(tenth));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(tenth), order.begin() + static_cast<std::ptrdiff_t>(2 * tenth));
  s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(2 * tenth), order.end());
  return s;
}

// ---------------------------------------------------------------- models

PhaseConfig SupervisedModel::predict_config(const std::vector<double>& raw_features) const {
  if (task != Task::classification) throw std::logic_error("predict_config: not a classifier");
  const auto x = standardization.apply(raw_features);
  const Eigen::VectorXd out = net.forward(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
  Eigen::Index arg = 0;
  out.maxCoeff(&arg);
  return config_from_rank(static_cast<std::uint64_t>(arg), groups, levels);
}

double SupervisedModel::predict_rate(const std::vector<double>& raw_features) const {
  if (task != Task::regression) throw std::logic_error("predict_rate: not a regressor");
  const auto x = standardization.apply(raw_features);
  const Eigen::VectorXd out = net.forward(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
  return target_mean + target_scale * out(0);
}

TrainResult train_supervised(const Dataset& ds, Task task, const TrainOptions& options, Rng& rng) {
  if (ds.size() < 10) throw std::invalid_argument("train_supervised: need at least 10 rows");
  if (options.batch_size == 0 || options.max_epochs == 0)
    throw std::invalid_argument("train_supervised: batch_size and max_epochs must be >= 1");

  TrainResult result;
  result.split = split_dataset(ds.size(), rng);
  const auto& train = result.split.train;
  const auto& val = result.split.validation;

  SupervisedModel& model = result.model;
  model.task = task;
  model.groups = ds.cfg.groups();
  model.levels = ds.cfg.levels();
  model.standardization = Standardization::fit(ds.rows, train);

  std::vector<double> targets(ds.size());
  if (task == Task::classification) {
    std::set<std::uint64_t> classes;
    for (auto i : train) classes.insert(config_rank(ds.rows[i].label, model.levels));
    if (classes.size() < 2) throw std::invalid_argument("train_supervised: single-class training set");
    for (std::size_t i = 0; i < ds.size(); ++i)
      targets[i] = static_cast<double>(config_rank(ds.rows[i].label, model.levels));
  } else {
    double m = 0.0, q = 0.0;
    for (auto i : train) m += ds.rows[i].label_rate;
    m /= static_cast<double>(train.size());
    for (auto i : train) q += std::pow(ds.rows[i].label_rate - m, 2);
    const double sd = std::sqrt(q / static_cast<double>(train.size()));
    model.target_mean = m;
    model.target_scale = sd > 0.0 ? sd : 1.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
      targets[i] = (ds.rows[i].label_rate - model.target_mean) / model.target_scale;
  }

  std::vector<std::size_t> sizes{ds.feature_size()};
  sizes.insert(sizes.end(), options.hidden.begin(), options.hidden.end());
  sizes.push_back(task == Task::classification ? space_size(model.groups, model.levels) : 1);
  model.net = Mlp(sizes, rng);
  AdamState adam(model.net, options.adam);

  const Eigen::MatrixXd x_val = feature_matrix(ds, model.standardization, val);
  std::vector<double> y_val;
  for (auto i : val) y_val.push_back(targets[i]);

  Mlp best = model.net;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  std::vector<std::size_t> order = train;
  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<double> y;
      for (auto i : batch) y.push_back(targets[i]);
      Mlp::Cache cache;
      const Eigen::MatrixXd out = model.net.forward_batch(feature_matrix(ds, model.standardization, batch), cache);
      const BatchLoss b = batch_loss(task, out, y);
      loss += b.loss;
      correct += b.correct;
      adam_step(model.net, model.net.backward(cache, b.grad), adam);
    }
    result.train_loss.push_back(loss / static_cast<double>(order.size()));
    if (task == Task::classification)
      result.train_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(order.size()));

    const double v = val.empty() ? result.train_loss.back()
                                 : batch_loss(task, model.net.forward_batch(x_val), y_val).loss /
                                       static_cast<double>(val.size());
    result.validation_loss.push_back(v);
    if (v < best_val) {
      best_val = v;
      best = model.net;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  model.net = std::move(best);
  return result;
}

// ---------------------------------------------------------------- evaluation

SupervisedMetrics evaluate_configs(const Dataset& ds, const std::vector<std::size_t>& rows,
                                   const ConfigPredictor& predict) {
  SupervisedMetrics m;
  m.rows = rows.size();
  if (rows.empty()) return m;
  double ratio = 0.0;
  std::size_t agree = 0;
  for (auto i : rows) {
    const DatasetRow& r = ds.rows.at(i);
    const PhaseConfig p = predict(r);
    agree += canonical_rotation(p, ds.cfg.levels()) == r.label;
    ratio += sum_rate(ds.realization(i), p, ds.cfg).sum_rate / r.label_rate;
  }
  m.top1 = static_cast<double>(agree) / static_cast<double>(rows.size());
  m.rate_ratio = ratio / static_cast<double>(rows.size());
  return m;
}

SupervisedMetrics evaluate_supervised(const SupervisedModel& model, const Dataset& ds,
                                      const std::vector<std::size_t>& rows) {
  if (model.task == Task::classification)
    return evaluate_configs(ds, rows, [&](const DatasetRow& r) { return model.predict_config(r.features); });
  SupervisedMetrics m;
  m.rows = rows.size();
  if (rows.empty()) return m;
  double sq = 0.0;
  for (auto i : rows) sq += std::pow(model.predict_rate(ds.rows.at(i).features) - ds.rows[i].label_rate, 2);
  m.rmse = std::sqrt(sq / static_cast<double>(rows.size()));
  return m;
}

}  // namespace ris
