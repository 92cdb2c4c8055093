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

#include "ris/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ris {

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& w : weights) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const auto& b : biases) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

bool Gradients::all_finite() const {
  for (const auto& w : weights)
    if (!w.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

// ---------------------------------------------------------------- Mlp

namespace {

void check_sizes(const std::vector<std::size_t>& sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
  for (std::size_t s : sizes)
    if (s == 0) throw std::invalid_argument("Mlp: layer sizes must be >= 1");
}

Gradients zeros_like(const std::vector<std::size_t>& sizes) {
  Gradients g;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    g.weights.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sizes[i + 1]),
                                              static_cast<Eigen::Index>(sizes[i])));
    g.biases.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sizes[i + 1])));
  }
  return g;
}

}  // namespace

Mlp Mlp::zeros(std::vector<std::size_t> layer_sizes) {
  check_sizes(layer_sizes);
  Mlp net;
  Gradients z = zeros_like(layer_sizes);
  net.sizes_ = std::move(layer_sizes);
  net.w_ = std::move(z.weights);
  net.b_ = std::move(z.biases);
  return net;
}

Mlp::Mlp(std::vector<std::size_t> layer_sizes, Rng& rng) : Mlp(zeros(std::move(layer_sizes))) {
  for (auto& w : w_) {
    std::normal_distribution<double> init(0.0, std::sqrt(2.0 / static_cast<double>(w.cols())));
    // row-major fill so the draw order matches the checkpoint layout
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = init(rng);
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < w_.size(); ++i) n += static_cast<std::size_t>(w_[i].size() + b_[i].size());
  return n;
}

void Mlp::check_input(const Eigen::MatrixXd& inputs) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_size())
    throw DimensionError("Mlp: input has " + std::to_string(inputs.rows()) + " rows, expected " +
                         std::to_string(input_size()));
  if (!inputs.allFinite()) throw std::domain_error("Mlp: non-finite input");
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const { return forward_batch(input); }

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
  check_input(inputs);
  Eigen::MatrixXd a = inputs;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    Eigen::MatrixXd z = w_[i] * a;
    z.colwise() += b_[i];
    a = (i + 1 < w_.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs, Cache& cache) const {
  check_input(inputs);
  cache.inputs.resize(w_.size());
  cache.pre.resize(w_.size());
  Eigen::MatrixXd a = inputs;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    cache.inputs[i] = a;
    cache.pre[i] = w_[i] * a;
    cache.pre[i].colwise() += b_[i];
    a = (i + 1 < w_.size()) ? Eigen::MatrixXd(cache.pre[i].cwiseMax(0.0)) : cache.pre[i];
  }
  return a;
}

Gradients Mlp::backward(const Cache& cache, const Eigen::MatrixXd& output_gradient) const {
  if (cache.inputs.size() != w_.size()) throw DimensionError("Mlp::backward: cache from a different network");
  if (static_cast<std::size_t>(output_gradient.rows()) != output_size() ||
      output_gradient.cols() != cache.inputs.front().cols())
    throw DimensionError("Mlp::backward: output gradient shape mismatch");
  Gradients g;
  g.weights.resize(w_.size());
  g.biases.resize(w_.size());
  Eigen::MatrixXd delta = output_gradient;
  for (std::size_t k = w_.size(); k-- > 0;) {
    if (k + 1 < w_.size()) delta = delta.cwiseProduct((cache.pre[k].array() > 0.0).cast<double>().matrix());
    g.weights[k] = delta * cache.inputs[k].transpose();
    g.biases[k] = delta.rowwise().sum();
    if (k > 0) delta = w_[k].transpose() * delta;
  }
  return g;
}

Gradients Mlp::backward(const Eigen::VectorXd& input, const Eigen::VectorXd& output_gradient) const {
  Cache cache;
  forward_batch(input, cache);
  return backward(cache, output_gradient);
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t i = 0; i < w_.size(); ++i) {
    for (Eigen::Index r = 0; r < w_[i].rows(); ++r)
      for (Eigen::Index c = 0; c < w_[i].cols(); ++c) out.push_back(w_[i](r, c));
    for (Eigen::Index r = 0; r < b_[i].size(); ++r) out.push_back(b_[i](r));
  }
  return out;
}

void Mlp::set_flat_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count())
    throw DimensionError("Mlp: expected " + std::to_string(parameter_count()) + " parameters, got " +
                         std::to_string(flat.size()));
  std::size_t p = 0;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    for (Eigen::Index r = 0; r < w_[i].rows(); ++r)
      for (Eigen::Index c = 0; c < w_[i].cols(); ++c) w_[i](r, c) = flat[p++];
    for (Eigen::Index r = 0; r < b_[i].size(); ++r) b_[i](r) = flat[p++];
  }
}

std::string Mlp::to_json() const {
  nlohmann::json j;
  j["layer_sizes"] = sizes_;
  j["parameters"] = flat_parameters();
  return j.dump();
}

Mlp Mlp::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Mlp net = zeros(j.at("layer_sizes").get<std::vector<std::size_t>>());
  net.set_flat_parameters(j.at("parameters").get<std::vector<double>>());
  return net;
}

void Mlp::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("Mlp::save: cannot open " + path.string());
  out << to_json() << '\n';
}

Mlp Mlp::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("Mlp::load: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

bool Mlp::operator==(const Mlp& other) const {
  return sizes_ == other.sizes_ && flat_parameters() == other.flat_parameters();
}

// ---------------------------------------------------------------- Adam

AdamState::AdamState(const Mlp& net, AdamConfig cfg)
    : config(cfg), m(zeros_like(net.layer_sizes())), v(zeros_like(net.layer_sizes())) {}

void adam_step(Mlp& net, const Gradients& grads, AdamState& state) {
  if (grads.weights.size() != net.layers() || state.m.weights.size() != net.layers())
    throw DimensionError("adam_step: layer count mismatch");
  for (std::size_t i = 0; i < net.layers(); ++i)
    if (grads.weights[i].rows() != net.weight(i).rows() || grads.weights[i].cols() != net.weight(i).cols() ||
        grads.biases[i].size() != net.bias(i).size())
      throw DimensionError("adam_step: gradient shape mismatch");
  if (!grads.all_finite()) throw std::domain_error("adam_step: non-finite gradient");

  const AdamConfig& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseAbs2();
    param.array() -= c.learning_rate * (m.array() / corr1) / ((v.array() / corr2).sqrt() + c.epsilon);
  };
  for (std::size_t i = 0; i < net.layers(); ++i) {
    update(net.weight(i), grads.weights[i], state.m.weights[i], state.v.weights[i]);
    update(net.bias(i), grads.biases[i], state.m.biases[i], state.v.biases[i]);
  }
}

double huber_loss(double error, double delta) {
  const double a = std::abs(error);
  return a <= delta ? 0.5 * error * error : delta * (a - 0.5 * delta);
}

double huber_gradient(double error, double delta) { return std::clamp(error, -delta, delta); }

// ---------------------------------------------------------------- replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
  data_.reserve(capacity);
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
  }
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= data_.size()) throw std::out_of_range("ReplayBuffer::at");
  return data_[(head_ + i) % data_.size()];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch, Rng& rng) const {
  if (batch > data_.size())
    throw std::invalid_argument("ReplayBuffer: batch " + std::to_string(batch) + " exceeds size " +
                                std::to_string(data_.size()));
  // Floyd's algorithm: distinct indices, each subset equally likely.
  std::vector<std::size_t> out;
  out.reserve(batch);
  const std::size_t n = data_.size();
  for (std::size_t j = n - batch; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    const std::size_t t = pick(rng);
    out.push_back(std::find(out.begin(), out.end(), t) == out.end() ? t : j);
  }
  return out;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  std::vector<const Transition*> out;
  for (std::size_t i : sample_indices(batch, rng)) out.push_back(&at(i));
  return out;
}

}  // namespace ris
