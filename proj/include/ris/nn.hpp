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

// Small dense networks: ReLU hidden layers, linear output, Adam, and a
// replay buffer. Batches are stored column-wise (one sample per column).

#ifndef RIS_NN_HPP
#define RIS_NN_HPP

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "ris/common.hpp"

namespace ris {

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  double max_abs() const;
  bool all_finite() const;
};

class Mlp {
 public:
  /// Intermediate values kept by a training forward pass.
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each affine layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each affine layer
  };

  Mlp() = default;
  /// He-initialised weights (std sqrt(2 / fan_in)), zero biases.
  Mlp(std::vector<std::size_t> layer_sizes, Rng& rng);
  /// All parameters zero.
  static Mlp zeros(std::vector<std::size_t> layer_sizes);

  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layers() const { return w_.size(); }
  std::size_t parameter_count() const;

  Eigen::MatrixXd& weight(std::size_t layer) { return w_.at(layer); }
  const Eigen::MatrixXd& weight(std::size_t layer) const { return w_.at(layer); }
  Eigen::VectorXd& bias(std::size_t layer) { return b_.at(layer); }
  const Eigen::VectorXd& bias(std::size_t layer) const { return b_.at(layer); }

  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs, Cache& cache) const;

  /// Parameter gradients of <output_gradient, f(input)>.
  Gradients backward(const Eigen::VectorXd& input, const Eigen::VectorXd& output_gradient) const;
  Gradients backward(const Cache& cache, const Eigen::MatrixXd& output_gradient) const;

  std::vector<double> flat_parameters() const;
  void set_flat_parameters(const std::vector<double>& flat);

  /// {"layer_sizes": [...], "parameters": [...]} with each layer's weights
  /// row-major followed by its biases.
  std::string to_json() const;
  static Mlp from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static Mlp load(const std::filesystem::path& path);

  bool operator==(const Mlp& other) const;

 private:
  void check_input(const Eigen::MatrixXd& inputs) const;

  std::vector<std::size_t> sizes_;
  std::vector<Eigen::MatrixXd> w_;  // out x in
  std::vector<Eigen::VectorXd> b_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(const Mlp& net, AdamConfig config);

  AdamConfig config;
  std::size_t step = 0;
  Gradients m;
  Gradients v;
};

/// One bias-corrected Adam update. Throws std::domain_error on non-finite
/// gradients and DimensionError on shape mismatch.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

double huber_loss(double error, double delta = 1.0);
double huber_gradient(double error, double delta = 1.0);

struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = true;
};

/// Fixed-capacity ring of transitions; the oldest entry is overwritten.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// Index 0 is the oldest stored transition.
  const Transition& at(std::size_t i) const;

  /// Distinct uniform indices (into at()); throws std::invalid_argument when
  /// fewer than `batch` transitions are stored.
  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const;
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<Transition> data_;
};

}  // namespace ris

#endif  // RIS_NN_HPP
