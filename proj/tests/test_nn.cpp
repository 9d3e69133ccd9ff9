// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "navae/error.hpp"
#include "navae/nn.hpp"
#include "test_util.hpp"

using namespace navae;
using navae::testing::random_matrix;
using navae::testing::TempDir;

namespace {

Mlp net_2layer_tanh(std::uint64_t seed) {
  const int dims[] = {5, 7, 3};
  const Activation acts[] = {Activation::kTanh, Activation::kIdentity};
  return Mlp::glorot(dims, acts, seed);
}

// Scalar loss: 0.5 * ||out - target||^2, with its output gradient.
double half_sq(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) {
  return 0.5 * (net.apply(x) - target).squaredNorm();
}

GradBundle half_sq_grad(const Mlp& net, const Eigen::MatrixXd& x,
                        const Eigen::MatrixXd& target) {
  const ForwardCache c = forward(net, x);
  return backward(net, c, c.output() - target).grads;
}

double oracle_act(Activation a, double v) {
  switch (a) {
    case Activation::kTanh: return std::tanh(v);
    case Activation::kRelu: return v > 0 ? v : 0.0;
    case Activation::kSigmoid: return 1.0 / (1.0 + std::exp(-v));
    case Activation::kIdentity: return v;
  }
  return v;
}

}  // namespace

TEST_CASE("identity layer with W = I passes input through") {
  Layer l{Eigen::MatrixXd::Identity(4, 4), Eigen::VectorXd::Zero(4), Activation::kIdentity};
  const Mlp net({l});
  const Eigen::MatrixXd x = random_matrix(4, 6, 1);
  CHECK(net.apply(x) == x);
}

TEST_CASE("tanh layer with zero weights outputs zeros") {
  Layer l{Eigen::MatrixXd::Zero(3, 5), Eigen::VectorXd::Zero(3), Activation::kTanh};
  const Mlp net({l});
  CHECK(net.apply(random_matrix(5, 4, 2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward agrees with a loop-based oracle") {
  const int dims[] = {6, 9, 4, 2};
  const Activation acts[] = {Activation::kTanh, Activation::kRelu, Activation::kSigmoid};
  const Mlp net = Mlp::glorot(dims, acts, 77);
  const Eigen::MatrixXd x = random_matrix(6, 5, 3);
  const Eigen::MatrixXd y = net.apply(x);
  for (int col = 0; col < x.cols(); ++col) {
    std::vector<double> a(x.col(col).data(), x.col(col).data() + 6);
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
      const Layer& l = net.layer(k);
      std::vector<double> next(l.out_dim());
      for (int r = 0; r < l.out_dim(); ++r) {
        double s = l.bias(r);
        for (int c = 0; c < l.in_dim(); ++c) s += l.weight(r, c) * a[c];
        next[r] = oracle_act(l.activation, s);
      }
      a = next;
    }
    for (int r = 0; r < 2; ++r) CHECK(std::abs(y(r, col) - a[r]) <= 1e-12);
  }
}

TEST_CASE("forward rejects a width mismatch") {
  const Mlp net = net_2layer_tanh(1);
  CHECK_THROWS_AS(forward(net, random_matrix(4, 2, 1)), UsageError);
}

TEST_CASE("glorot bounds, shapes and parameter count") {
  const int dims[] = {513, 128, 128, 32};
  const Activation acts[] = {Activation::kTanh, Activation::kTanh, Activation::kIdentity};
  const Mlp net = Mlp::glorot(dims, acts, 5);
  CHECK(net.parameter_count() == 513 * 128 + 128 + 128 * 128 + 128 + 128 * 32 + 32);
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const Layer& l = net.layer(k);
    const double bound = std::sqrt(6.0 / (l.in_dim() + l.out_dim()));
    CHECK(l.weight.cwiseAbs().maxCoeff() <= bound);
    CHECK(l.bias.cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(Mlp::glorot(dims, acts, 5).same_parameters(net));
  CHECK_FALSE(Mlp::glorot(dims, acts, 6).same_parameters(net));
}

TEST_CASE("zero output gradient gives zero gradients") {
  const Mlp net = net_2layer_tanh(3);
  const Eigen::MatrixXd x = random_matrix(5, 4, 4);
  const ForwardCache c = forward(net, x);
  const Backprop bp = backward(net, c, Eigen::MatrixXd::Zero(3, 4));
  CHECK(bp.grads.max_abs() == 0.0);
  CHECK(bp.input_grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear net with squared error matches the normal-equation residual") {
  const int dims[] = {4, 3};
  const Activation acts[] = {Activation::kIdentity};
  const Mlp net = Mlp::glorot(dims, acts, 8);
  const Eigen::MatrixXd x = random_matrix(4, 10, 9), t = random_matrix(3, 10, 10);
  const GradBundle g = half_sq_grad(net, x, t);
  const Eigen::MatrixXd residual =
      (net.layer(0).weight * x).colwise() + net.layer(0).bias - t;
  CHECK((g.weight[0] - residual * x.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((g.bias[0] - residual.rowwise().sum()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("finite-difference checks on three architectures") {
  const Eigen::MatrixXd x = random_matrix(5, 6, 11);

  SUBCASE("single identity layer") {
    const int dims[] = {5, 3};
    const Activation acts[] = {Activation::kIdentity};
    Mlp net = Mlp::glorot(dims, acts, 1);
    const Eigen::MatrixXd t = random_matrix(3, 6, 12);
    const GradBundle g = half_sq_grad(net, x, t);
    Mlp* nets[] = {&net};
    const auto r = grad_check(nets, std::span(&g, 1), [&] { return half_sq(net, x, t); });
    CHECK(r.max_rel_error <= 1e-4);
    CHECK(r.checked == net.parameter_count());
  }
  SUBCASE("two tanh layers") {
    Mlp net = net_2layer_tanh(2);
    const Eigen::MatrixXd t = random_matrix(3, 6, 13);
    const GradBundle g = half_sq_grad(net, x, t);
    Mlp* nets[] = {&net};
    const auto r = grad_check(nets, std::span(&g, 1), [&] { return half_sq(net, x, t); });
    CHECK(r.max_rel_error <= 1e-4);
  }
  SUBCASE("relu hidden, sigmoid output") {
    const int dims[] = {5, 8, 4};
    const Activation acts[] = {Activation::kRelu, Activation::kSigmoid};
    Mlp net = Mlp::glorot(dims, acts, 3);
    const Eigen::MatrixXd t = random_matrix(4, 6, 14, 0.0, 1.0);
    const GradBundle g = half_sq_grad(net, x, t);
    Mlp* nets[] = {&net};
    const auto r = grad_check(nets, std::span(&g, 1), [&] { return half_sq(net, x, t); });
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("grad_check reports a wrong gradient") {
  Mlp net = net_2layer_tanh(4);
  const Eigen::MatrixXd x = random_matrix(5, 3, 1), t = random_matrix(3, 3, 2);
  GradBundle g = half_sq_grad(net, x, t);
  g.weight[1](2, 3) += 0.5;
  Mlp* nets[] = {&net};
  const auto r = grad_check(nets, std::span(&g, 1), [&] { return half_sq(net, x, t); });
  CHECK(r.max_rel_error > 1e-2);
  CHECK(r.layer == 1);
  CHECK_FALSE(r.bias);
  CHECK(r.index == 3 * 3 + 2);  // column-major (2, 3) in a 3-row matrix
}

TEST_CASE("stale forward cache is rejected") {
  Mlp net = net_2layer_tanh(5);
  const Eigen::MatrixXd x = random_matrix(5, 2, 1);
  const ForwardCache c = forward(net, x);
  net.mutable_layer(0).bias(0) += 1.0;
  CHECK_THROWS_AS(backward(net, c, Eigen::MatrixXd::Ones(3, 2)), UsageError);
  const Mlp other = net_2layer_tanh(5);
  const ForwardCache c2 = forward(other, x);
  CHECK_THROWS_AS(backward(net, c2, Eigen::MatrixXd::Ones(3, 2)), UsageError);
}

TEST_CASE("Adam single step on a scalar") {
  Layer l{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::VectorXd::Zero(1), Activation::kIdentity};
  Mlp net({l});
  AdamState st = AdamState::for_net(net, 1e-3);
  GradBundle g = GradBundle::zeros_like(net);
  g.weight[0](0, 0) = 1.0;
  adam_step(net, g, st);
  // Bias-corrected moments are 1 and 1, so the step is lr / (1 + eps).
  CHECK(st.step == 1);
  CHECK(0.5 - net.layer(0).weight(0, 0) == doctest::Approx(1e-3 / (1.0 + 1e-8)).epsilon(1e-9));
  CHECK(net.layer(0).bias(0) == 0.0);
}

TEST_CASE("Adam with zero gradient leaves parameters unchanged") {
  Mlp net = net_2layer_tanh(6);
  const Mlp before = net;
  AdamState st = AdamState::for_net(net, 1e-3);
  adam_step(net, GradBundle::zeros_like(net), st);
  CHECK(st.step == 1);
  CHECK(net.same_parameters(before));
}

TEST_CASE("Adam rejects non-finite gradients") {
  Mlp net = net_2layer_tanh(7);
  AdamState st = AdamState::for_net(net, 1e-3);
  GradBundle g = GradBundle::zeros_like(net);
  g.bias[0](1) = std::nan("");
  CHECK_THROWS_AS(adam_step(net, g, st), NumericError);
}

TEST_CASE("Adam lowers a convex quadratic and is deterministic") {
  const int dims[] = {4, 2};
  const Activation acts[] = {Activation::kIdentity};
  const Eigen::MatrixXd x = random_matrix(4, 20, 1), t = random_matrix(2, 20, 2);
  auto run = [&] {
    Mlp net = Mlp::glorot(dims, acts, 9);
    AdamState st = AdamState::for_net(net, 1e-2);
    const double start = half_sq(net, x, t);
    for (int i = 0; i < 200; ++i) adam_step(net, half_sq_grad(net, x, t), st);
    CHECK(half_sq(net, x, t) < start);
    return net;
  };
  const Mlp a = run(), b = run();
  CHECK(a.same_parameters(b));
}

TEST_CASE("checkpoint layout and bit-exact round trip") {
  TempDir dir("ckpt");
  const int dims[] = {3, 2};
  const Activation acts[] = {Activation::kSigmoid};
  const Mlp small = Mlp::glorot(dims, acts, 1);
  std::ostringstream os;
  write_mlp(os, small);
  const std::string bytes = os.str();
  REQUIRE(bytes.size() == 6 + 4 + 8 + 8 * 6 + 8 * 2 + 1);
  CHECK(bytes.substr(0, 6) == "NAVAE1");
  CHECK(static_cast<unsigned char>(bytes[6]) == 1);
  CHECK(bytes[7] == 0);
  CHECK(static_cast<unsigned char>(bytes[10]) == 2);  // out
  CHECK(static_cast<unsigned char>(bytes[14]) == 3);  // in
  double w01;
  std::memcpy(&w01, bytes.data() + 18 + 8, 8);  // row-major: (0, 1)
  CHECK(w01 == small.layer(0).weight(0, 1));
  CHECK(static_cast<unsigned char>(bytes.back()) == static_cast<unsigned char>(Activation::kSigmoid));

  const std::vector<Mlp> nets = {net_2layer_tanh(1), small};
  save_checkpoint(dir / "n.ckpt", nets);
  const auto back = load_checkpoint(dir / "n.ckpt");
  REQUIRE(back.size() == 2);
  CHECK(back[0].same_parameters(nets[0]));
  CHECK(back[1].same_parameters(nets[1]));
  CHECK(back[1].layer(0).activation == Activation::kSigmoid);

  {
    std::ofstream bad(dir / "bad.ckpt", std::ios::binary);
    bad << "NAVAE0 garbage";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.ckpt"), DataError);
  {
    std::ofstream cut(dir / "cut.ckpt", std::ios::binary);
    cut << bytes.substr(0, 30);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), DataError);
}
