#include "doctest.h"

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <filesystem>

#include "ris/nn.hpp"

using namespace ris;

namespace {

// Straight-line forward pass with explicit loops.
std::vector<double> reference_forward(const Mlp& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const auto& w = net.weight(l);
    std::vector<double> y(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      double s = net.bias(l)(r);
      for (Eigen::Index c = 0; c < w.cols(); ++c) s += w(r, c) * x[static_cast<std::size_t>(c)];
      y[static_cast<std::size_t>(r)] = (l + 1 < net.layers()) ? std::max(0.0, s) : s;
    }
    x = std::move(y);
  }
  return x;
}

// Largest relative error between backward() and central differences of
// L(theta) = <g, f(x; theta)>.
double max_gradient_error(const Mlp& net, const Eigen::VectorXd& x, const Eigen::VectorXd& g) {
  const Gradients an = net.backward(x, g);
  std::vector<double> analytic;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    for (Eigen::Index r = 0; r < an.weights[l].rows(); ++r)
      for (Eigen::Index c = 0; c < an.weights[l].cols(); ++c) analytic.push_back(an.weights[l](r, c));
    for (Eigen::Index r = 0; r < an.biases[l].size(); ++r) analytic.push_back(an.biases[l](r));
  }
  const double h = 1e-5;
  Mlp probe = net;
  const auto theta = net.flat_parameters();
  double worst = 0.0;
  for (std::size_t p = 0; p < theta.size(); ++p) {
    auto t = theta;
    t[p] = theta[p] + h;
    probe.set_flat_parameters(t);
    const double up = g.dot(probe.forward(x));
    t[p] = theta[p] - h;
    probe.set_flat_parameters(t);
    const double down = g.dot(probe.forward(x));
    const double fd = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic[p]), 1e-6});
    worst = std::max(worst, std::abs(fd - analytic[p]) / scale);
  }
  return worst;
}

Eigen::VectorXd random_vector(std::size_t n, Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = d(rng);
  return v;
}

}  // namespace

TEST_CASE("forward pass") {
  SUBCASE("zero network") {
    const Mlp net = Mlp::zeros({3, 5, 2});
    CHECK(net.forward(Eigen::Vector3d(1, -2, 3)).isZero());
  }
  SUBCASE("single affine layer") {
    Mlp net = Mlp::zeros({1, 1});
    net.weight(0)(0, 0) = 2.0;
    net.bias(0)(0) = 1.0;
    CHECK(net.forward(Eigen::VectorXd::Constant(1, 3.0))(0) == 7.0);
  }
  SUBCASE("seeded 4-8-3 against loops") {
    Rng rng(17);
    const Mlp net({4, 8, 3}, rng);
    const Eigen::VectorXd x = random_vector(4, rng);
    const auto ref = reference_forward(net, {x(0), x(1), x(2), x(3)});
    const auto y = net.forward(x);
    for (int i = 0; i < 3; ++i) CHECK(y(i) == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-13));
    CHECK(net.forward(x) == y);
  }
  SUBCASE("batch columns equal single passes") {
    Rng rng(3);
    const Mlp net({5, 7, 7, 2}, rng);
    Eigen::MatrixXd xs(5, 4);
    for (int c = 0; c < 4; ++c) xs.col(c) = random_vector(5, rng);
    const Eigen::MatrixXd ys = net.forward_batch(xs);
    for (int c = 0; c < 4; ++c) CHECK((ys.col(c) - net.forward(xs.col(c))).norm() < 1e-14);
  }
  SUBCASE("errors") {
    Rng rng(0);
    const Mlp net({3, 2}, rng);
    CHECK_THROWS_AS(net.forward(Eigen::VectorXd::Zero(4)), DimensionError);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(3);
    bad(1) = std::nan("");
    CHECK_THROWS_AS(net.forward(bad), std::domain_error);
    CHECK_THROWS_AS(Mlp::zeros({3}), std::invalid_argument);
  }
}

TEST_CASE("backward pass") {
  SUBCASE("zero output gradient") {
    Rng rng(1);
    const Mlp net({3, 4, 2}, rng);
    CHECK(net.backward(random_vector(3, rng), Eigen::VectorXd::Zero(2)).max_abs() == 0.0);
  }
  SUBCASE("hand derivative of a squared error") {
    Mlp net = Mlp::zeros({1, 1});
    net.weight(0)(0, 0) = 1.0;
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
    const double y = net.forward(x)(0);
    const Eigen::VectorXd dl_dy = Eigen::VectorXd::Constant(1, 2.0 * (y - 0.0));
    const Gradients g = net.backward(x, dl_dy);
    CHECK(g.weights[0](0, 0) == doctest::Approx(2.0));
    CHECK(g.biases[0](0) == doctest::Approx(2.0));
  }
  SUBCASE("central differences on 20 seeded 6-16-16-4 nets") {
    for (std::uint64_t s = 0; s < 20; ++s) {
      Rng rng(s);
      Mlp net({6, 16, 16, 4}, rng);
      for (std::size_t l = 0; l < net.layers(); ++l)
        for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) net.bias(l)(i) = 0.1 * random_vector(1, rng)(0);
      const Eigen::VectorXd x = random_vector(6, rng);
      const Eigen::VectorXd g = random_vector(4, rng);
      CHECK(max_gradient_error(net, x, g) < 1e-4);
    }
  }
  SUBCASE("batch gradient is the sum of per-sample gradients") {
    Rng rng(8);
    const Mlp net({3, 6, 2}, rng);
    Eigen::MatrixXd xs(3, 3), gs(2, 3);
    for (int c = 0; c < 3; ++c) {
      xs.col(c) = random_vector(3, rng);
      gs.col(c) = random_vector(2, rng);
    }
    Mlp::Cache cache;
    net.forward_batch(xs, cache);
    const Gradients batch = net.backward(cache, gs);
    Eigen::MatrixXd w0 = Eigen::MatrixXd::Zero(6, 3);
    for (int c = 0; c < 3; ++c) w0 += net.backward(Eigen::VectorXd(xs.col(c)), Eigen::VectorXd(gs.col(c))).weights[0];
    CHECK((batch.weights[0] - w0).norm() < 1e-12);
    CHECK_THROWS_AS(net.backward(cache, Eigen::MatrixXd::Zero(3, 3)), DimensionError);
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters") {
    Rng rng(2);
    Mlp net({2, 3, 1}, rng);
    const Mlp before = net;
    AdamState st(net, AdamConfig{});
    Gradients zero = net.backward(Eigen::Vector2d(1, 1), Eigen::VectorXd::Zero(1));
    adam_step(net, zero, st);
    CHECK(net == before);
    CHECK(st.step == 1);
  }
  SUBCASE("first step moves by the learning rate") {
    Mlp net = Mlp::zeros({1, 1});
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    AdamState st(net, cfg);
    Gradients g = net.backward(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 0.3));
    adam_step(net, g, st);
    CHECK(net.weight(0)(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
    CHECK(net.bias(0)(0) == doctest::Approx(-0.01).epsilon(1e-6));
  }
  SUBCASE("quadratic loss decreases") {
    Mlp net = Mlp::zeros({1, 1});
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    AdamState st(net, cfg);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.0);
    std::vector<double> losses;
    for (int t = 0; t < 200; ++t) {
      const double err = net.forward(x)(0) - 5.0;
      losses.push_back(err * err);
      adam_step(net, net.backward(x, Eigen::VectorXd::Constant(1, 2.0 * err)), st);
    }
    for (std::size_t t = 11; t < losses.size(); ++t) CHECK(losses[t] < losses[t - 1]);
  }
  SUBCASE("non-finite gradient") {
    Mlp net = Mlp::zeros({1, 1});
    AdamState st(net, AdamConfig{});
    Gradients g = net.backward(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 1.0));
    g.weights[0](0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(adam_step(net, g, st), std::domain_error);
  }
}

TEST_CASE("huber") {
  CHECK(huber_loss(0.5) == doctest::Approx(0.125));
  CHECK(huber_loss(-3.0) == doctest::Approx(2.5));
  CHECK(huber_gradient(0.5) == 0.5);
  CHECK(huber_gradient(-3.0) == -1.0);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(4);
  const Mlp net({4, 8, 3}, rng);
  CHECK(Mlp::from_json(net.to_json()) == net);
  const auto path = std::filesystem::temp_directory_path() / "ris_nn_checkpoint_test.json";
  net.save(path);
  const Mlp back = Mlp::load(path);
  std::filesystem::remove(path);
  CHECK(back == net);
  CHECK(back.layer_sizes() == std::vector<std::size_t>{4, 8, 3});
  CHECK_THROWS(Mlp::load(path));
}

TEST_CASE("replay buffer") {
  auto item = [](double r) {
    Transition t;
    t.reward = r;
    return t;
  };
  SUBCASE("ring overwrite") {
    ReplayBuffer buf(3);
    for (int i = 1; i <= 5; ++i) buf.push(item(i));
    CHECK(buf.size() == 3);
    CHECK(buf.at(0).reward == 3.0);
    CHECK(buf.at(1).reward == 4.0);
    CHECK(buf.at(2).reward == 5.0);
  }
  SUBCASE("full-size batch is the whole buffer") {
    ReplayBuffer buf(10);
    for (int i = 0; i < 6; ++i) buf.push(item(i));
    Rng rng(0);
    auto idx = buf.sample_indices(6, rng);
    std::sort(idx.begin(), idx.end());
    CHECK(idx == std::vector<std::size_t>{0, 1, 2, 3, 4, 5});
    Rng rng2(0);
    CHECK_THROWS_AS(buf.sample(7, rng2), std::invalid_argument);
  }
  SUBCASE("distinct, uniform indices") {
    ReplayBuffer buf(20);
    for (int i = 0; i < 20; ++i) buf.push(item(i));
    Rng rng(123);
    std::vector<double> counts(20, 0.0);
    const int draws = 20000;
    for (int d = 0; d < draws; ++d) {
      auto idx = buf.sample_indices(5, rng);
      std::sort(idx.begin(), idx.end());
      CHECK(std::adjacent_find(idx.begin(), idx.end()) == idx.end());
      for (auto i : idx) counts[i] += 1.0;
    }
    const double expected = draws * 5.0 / 20.0;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    const boost::math::chi_squared dist(19.0);
    CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
  }
}
