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

// Heuristic-labelled datasets and MLP predictors of phase configurations
// (classification over the joint space) and of the achievable sum-rate.

#ifndef RIS_SUPERVISED_HPP
#define RIS_SUPERVISED_HPP

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ris/metaheuristics.hpp"
#include "ris/nn.hpp"
#include "ris/search.hpp"

namespace ris {

enum class Labeler { greedy, tabu, exhaustive };

std::string to_string(Labeler labeler);
/// Throws std::invalid_argument for an unknown name.
Labeler labeler_from_string(const std::string& name);

struct LabelerOptions {
  std::size_t greedy_sweeps = kMaxGreedySweeps;
  TabuParams tabu;
  std::uint64_t exhaustive_cap = kDefaultExhaustiveCap;
};

/// Rotates every phase so that group 0 sits at index 0. The rates do not
/// change, so each class of rotation-equivalent optima gets one label.
PhaseConfig canonical_rotation(const PhaseConfig& cfg, int levels);

struct DatasetRow {
  std::uint64_t channel_seed = 0;  // realization = sample_channels(cfg, derive_rng(seed, "channel"))
  std::vector<double> features;    // raw relative_channel_features, 2*G*K
  PhaseConfig label;               // canonical rotation
  double label_rate = 0.0;
};

/// Per-dimension affine map fitted on a subset of rows.
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;  // 1 where the fitted spread is zero

  static Standardization fit(const std::vector<DatasetRow>& rows, const std::vector<std::size_t>& indices);
  std::vector<double> apply(const std::vector<double>& x) const;
  bool operator==(const Standardization&) const = default;
};

struct Dataset {
  SystemConfig cfg;
  Labeler labeler = Labeler::greedy;
  std::vector<DatasetRow> rows;
  std::optional<Standardization> standardization;
  double generation_seconds = 0.0;
  std::size_t evaluations = 0;

  std::size_t size() const { return rows.size(); }
  std::size_t feature_size() const { return rows.empty() ? 0 : rows.front().features.size(); }
  ChannelRealization realization(std::size_t row) const;

  /// One JSON header line (schema, labeler, system config, standardization)
  /// followed by a CSV header and one CSV line per row.
  void save(const std::filesystem::path& path) const;
  static Dataset load(const std::filesystem::path& path);
};

/// Draws `n_rows` independent realizations and labels each with the chosen
/// optimizer (greedy from all-zeros, tabu from all-zeros, or exhaustive).
/// Throws SpaceTooLargeError when exhaustive labelling exceeds the cap.
Dataset generate_dataset(const SystemConfig& cfg, std::size_t n_rows, Labeler labeler, Rng& rng,
                         const LabelerOptions& options = {});

struct DataSplit {
  std::vector<std::size_t> train, validation, test;
};

/// Seeded shuffle, then 80/10/10 (validation and test get floor(n/10) each).
DataSplit split_dataset(std::size_t n_rows, Rng& rng);

enum class Task { classification, regression };

struct TrainOptions {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t max_epochs = 200;
  std::size_t batch_size = 64;
  std::size_t patience = 10;
  AdamConfig adam;
};

struct SupervisedModel {
  Task task = Task::classification;
  std::size_t groups = 0;
  int levels = 0;
  Mlp net;
  Standardization standardization;
  double target_mean = 0.0;  // regression target map
  double target_scale = 1.0;

  PhaseConfig predict_config(const std::vector<double>& raw_features) const;
  double predict_rate(const std::vector<double>& raw_features) const;
};

struct TrainResult {
  SupervisedModel model;
  DataSplit split;
  std::vector<double> train_loss;       // per epoch
  std::vector<double> validation_loss;  // per epoch
  std::vector<double> train_accuracy;   // per epoch, classification only
  std::size_t best_epoch = 0;           // 0-based; the returned weights
};

/// Splits with `rng`, fits the standardization on the training rows, trains
/// with Adam on minibatches and stops after `patience` epochs without a
/// strictly lower validation loss. Classification uses softmax cross-entropy
/// over L^G classes; regression uses squared error on the standardized rate.
/// Throws std::invalid_argument when classifying a single-class training set
/// or when the dataset is too small to split.
TrainResult train_supervised(const Dataset& ds, Task task, const TrainOptions& options, Rng& rng);

struct SupervisedMetrics {
  std::size_t rows = 0;
  std::optional<double> top1;
  std::optional<double> rate_ratio;  // mean of sum_rate(predicted) / label_rate
  std::optional<double> rmse;
};

using ConfigPredictor = std::function<PhaseConfig(const DatasetRow&)>;

/// Rate ratios re-evaluate the predicted configs on each row's realization.
SupervisedMetrics evaluate_configs(const Dataset& ds, const std::vector<std::size_t>& rows,
                                   const ConfigPredictor& predict);
SupervisedMetrics evaluate_supervised(const SupervisedModel& model, const Dataset& ds,
                                      const std::vector<std::size_t>& rows);

}  // namespace ris

#endif  // RIS_SUPERVISED_HPP
