// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <random>

#include "doctest.h"
#include "navae/dnnwf.hpp"
#include "navae/error.hpp"
#include "navae/eval.hpp"
#include "test_util.hpp"

using namespace navae;
using navae::testing::random_matrix;
using navae::testing::random_power;
using navae::testing::random_wave;
using navae::testing::TempDir;

namespace {

constexpr int kN = 64, kH = 16, kF = kN / 2 + 1;

std::vector<PairedUtterance> toy_pairs(int n, std::uint64_t seed, double snr = 0.0) {
  const SynthCorpus c = synth_corpus(seed, n, 0.25);
  std::vector<PairedUtterance> out;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < n; ++i) {
    const Waveform noise = fit_noise_length(c.noise[i], c.clean[i].size(), rng);
    out.push_back(make_pair(c.clean[i], mix_at_snr(c.clean[i], noise, snr), kN, kH));
  }
  return out;
}

double mean_mse(const MaskNet& net, const std::vector<PairedUtterance>& pairs) {
  double sum = 0.0;
  for (const auto& p : pairs) sum += mask_loss(net, p.noisy, ideal_mask(p.clean, p.noise));
  return sum / pairs.size();
}

MaskNet constant_mask(double logit) {
  MaskNet net = MaskNet::create(kF, 8, 1, 1);
  net.net.set_zero();
  Layer& out = net.net.mutable_layer(net.net.num_layers() - 1);
  out.bias.setConstant(logit);
  net.norm = NormStats{0.0, 1.0};
  return net;
}

}  // namespace

TEST_CASE("ideal mask cases") {
  const Eigen::MatrixXd s = random_power(5, 4, 1);
  CHECK((ideal_mask(s, Eigen::MatrixXd::Zero(5, 4)).array() == 1.0).all());
  CHECK((ideal_mask(s, s).array() == 0.5).all());
  const Eigen::MatrixXd m = ideal_mask(s, random_power(5, 4, 2));
  CHECK(m.minCoeff() >= 0.0);
  CHECK(m.maxCoeff() <= 1.0);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  CHECK(ideal_mask(zero, zero).allFinite());
}

TEST_CASE("default mask network shape") {
  const MaskNet net = MaskNet::create_default(1);
  REQUIRE(net.net.num_layers() == 6);
  CHECK(net.net.input_dim() == 513);
  CHECK(net.net.output_dim() == 513);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(net.net.layer(k).out_dim() == 128);
    CHECK(net.net.layer(k).activation == Activation::kRelu);
  }
  CHECK(net.net.layer(5).activation == Activation::kSigmoid);
}

TEST_CASE("mask predictions stay in [0, 1]") {
  MaskNet net = MaskNet::create(kF, 16, 3, 2);
  net.norm = NormStats{0.0, 1e-3};  // large normalised inputs push the sigmoid hard
  const Eigen::MatrixXd m = net.predict(random_power(kF, 20, 3));
  CHECK(m.minCoeff() >= 0.0);
  CHECK(m.maxCoeff() <= 1.0);
}

TEST_CASE("MSE gradient passes finite differences") {
  MaskNet net = MaskNet::create(kF, 6, 2, 4);
  const Eigen::MatrixXd x = random_power(kF, 5, 5);
  net.norm = compute_norm_stats(std::span(&x, 1));
  const Eigen::MatrixXd target = random_matrix(kF, 5, 6, 0.0, 1.0);
  const MaskGradient g = mask_loss_and_grad(net, x, target);
  CHECK(g.loss == doctest::Approx(mask_loss(net, x, target)));
  CHECK(g.loss == doctest::Approx((net.predict(x) - target).squaredNorm() / target.size()));
  Mlp* nets[] = {&net.net};
  const auto r = grad_check(nets, std::span(&g.grads, 1), [&] { return mask_loss(net, x, target); });
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("an overfit 64-frame set reaches low MSE") {
  PairedUtterance p = toy_pairs(1, 3)[0];
  p.clean.conservativeResize(Eigen::NoChange, 64);
  p.noisy.conservativeResize(Eigen::NoChange, 64);
  p.noise.conservativeResize(Eigen::NoChange, 64);
  const std::vector<PairedUtterance> small = {p};
  MaskNet net = MaskNet::create(kF, 64, 2, 5);
  MaskTrainOptions o;
  o.epochs = 1500;
  o.lr = 3e-3;
  o.batch_size = 64;
  o.seed = 1;
  const auto losses = train_dnnwf(net, small, o);
  CHECK(losses.back() < 1e-3);
}

TEST_CASE("training beats the untrained net on held-out pairs") {
  const auto train = toy_pairs(20, 7), held = toy_pairs(5, 8);
  MaskNet net = MaskNet::create(kF, 32, 3, 6);
  net.norm = norm_stats_for(train, NormSource::kNoisy);
  const double before = mean_mse(net, held);
  MaskTrainOptions o;
  o.epochs = 30;
  o.seed = 2;
  train_dnnwf(net, train, o);
  CHECK(mean_mse(net, held) < before);
}

TEST_CASE("all-ones and all-zeros masks") {
  Waveform x = random_wave(4000, 3, 0.2);
  const Waveform ones = enhance_dnnwf(constant_mask(100.0), x, kN, kH);
  REQUIRE(ones.size() == x.size());
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    err += std::pow(ones.samples[i] - x.samples[i], 2);
    ref += x.samples[i] * x.samples[i];
  }
  CHECK(std::sqrt(err / ref) <= 1e-10);

  const Waveform zeros = enhance_dnnwf(constant_mask(-745.0), x, kN, kH);
  double peak = 0.0;
  for (double v : zeros.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak <= 1e-300);
}

TEST_CASE("trained masks improve SI-SDR on toy 0 dB mixtures") {
  const auto train = toy_pairs(40, 11);
  MaskNet net = MaskNet::create(kF, 64, 3, 9);
  MaskTrainOptions o;
  o.epochs = 40;
  o.seed = 3;
  train_dnnwf(net, train, o);

  const SynthCorpus c = synth_corpus(12, 8, 0.5);
  std::mt19937_64 rng(1);
  double gain = 0.0;
  for (int i = 0; i < 8; ++i) {
    const Waveform noise = fit_noise_length(c.noise[i], c.clean[i].size(), rng);
    const Mixture m = mix_at_snr(c.clean[i], noise, 0.0);
    const Waveform y = enhance_dnnwf(net, m.mixture, kN, kH);
    gain += si_sdr(y, c.clean[i]) - si_sdr(m.mixture, c.clean[i]);
  }
  CHECK(gain / 8 > 0.0);
}

TEST_CASE("mask network checkpoint round trip") {
  TempDir dir("dnnwf");
  MaskNet net = MaskNet::create(kF, 8, 2, 3);
  net.norm = NormStats{1.5, 0.5};
  save_dnnwf(dir / "m.ckpt", net);
  const MaskNet back = load_dnnwf(dir / "m.ckpt");
  CHECK(back.net.same_parameters(net.net));
  REQUIRE(back.norm.has_value());
  CHECK(back.norm->mean == 1.5);
}
