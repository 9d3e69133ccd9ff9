// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/dnnwf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "navae/error.hpp"
#include "navae/vae.hpp"

namespace navae {

namespace {

void check_input(const MaskNet& net, const Eigen::MatrixXd& power) {
  if (!net.norm) throw UsageError("mask network has no normalisation statistics");
  if (power.rows() != net.net.input_dim())
    throw UsageError("mask network: input has " + std::to_string(power.rows()) +
                     " bins, expected " + std::to_string(net.net.input_dim()));
  if (!power.allFinite()) throw NumericError("mask network: non-finite input");
}

}  // namespace

MaskNet MaskNet::create(int freq_bins, int hidden_units, int hidden_layers,
                        std::uint64_t seed) {
  std::vector<int> dims{freq_bins};
  std::vector<Activation> acts;
  for (int i = 0; i < hidden_layers; ++i) {
    dims.push_back(hidden_units);
    acts.push_back(Activation::kRelu);
  }
  dims.push_back(freq_bins);
  acts.push_back(Activation::kSigmoid);
  MaskNet m;
  m.net = Mlp::glorot(dims, acts, seed);
  return m;
}

MaskNet MaskNet::create_default(std::uint64_t seed) {
  return create(kFrameLength / 2 + 1, kHiddenUnits, kMaskHiddenLayers, seed);
}

Eigen::MatrixXd MaskNet::predict(const Eigen::MatrixXd& noisy_power) const {
  check_input(*this, noisy_power);
  return net.apply(apply_norm(noisy_power, *norm));
}

Eigen::MatrixXd ideal_mask(const Eigen::MatrixXd& clean_power,
                           const Eigen::MatrixXd& noise_power) {
  if (clean_power.rows() != noise_power.rows() || clean_power.cols() != noise_power.cols())
    throw UsageError("ideal_mask: clean and noise shapes differ");
  return clean_power.array() / (clean_power.array() + noise_power.array()).max(1e-12);
}

MaskGradient mask_loss_and_grad(const MaskNet& net, const Eigen::MatrixXd& noisy_power,
                                const Eigen::MatrixXd& target_mask) {
  check_input(net, noisy_power);
  if (target_mask.rows() != noisy_power.rows() || target_mask.cols() != noisy_power.cols())
    throw UsageError("mask loss: target shape differs from input");
  const ForwardCache cache = forward(net.net, apply_norm(noisy_power, *net.norm));
  const Eigen::MatrixXd diff = cache.output() - target_mask;
  const double count = static_cast<double>(diff.size());
  MaskGradient g;
  g.loss = diff.squaredNorm() / count;
  g.grads = backward(net.net, cache, (2.0 / count) * diff).grads;
  return g;
}

double mask_loss(const MaskNet& net, const Eigen::MatrixXd& noisy_power,
                 const Eigen::MatrixXd& target_mask) {
  const Eigen::MatrixXd diff = net.predict(noisy_power) - target_mask;
  return diff.squaredNorm() / static_cast<double>(diff.size());
}

std::vector<double> train_dnnwf(MaskNet& net, std::span<const PairedUtterance> pairs,
                                const MaskTrainOptions& options) {
  if (pairs.empty()) throw UsageError("train_dnnwf: empty dataset");
  if (!net.norm) net.norm = norm_stats_for(pairs, options.norm_source);
  const Eigen::MatrixXd noisy = stack_noisy(pairs);
  const Eigen::MatrixXd target = ideal_mask(stack_clean(pairs), stack_noise(pairs));
  const Eigen::Index n = noisy.cols();

  AdamState opt = AdamState::for_net(net.net, options.lr);
  std::vector<double> history;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const auto order = shuffled_indices(n, mix_seed(options.seed, 0xD77F, epoch));
    double total = 0.0;
    for (Eigen::Index start = 0; start < n; start += options.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(options.batch_size, n - start);
      const auto cols = std::span(order).subspan(start, len);
      MaskGradient g = mask_loss_and_grad(net, gather_columns(noisy, cols),
                                          gather_columns(target, cols));
      total += g.loss * static_cast<double>(len);
      adam_step(net.net, g.grads, opt);
    }
    const double mean = total / static_cast<double>(n);
    if (!std::isfinite(mean))
      throw NumericError("train_dnnwf: loss diverged at epoch " + std::to_string(epoch));
    history.push_back(mean);
    if (options.on_epoch) options.on_epoch(epoch, mean);
  }
  return history;
}

Waveform enhance_dnnwf(const MaskNet& net, const Waveform& noisy, int frame_len, int hop) {
  ComplexSpectrogram spec = stft(noisy, frame_len, hop);
  const Eigen::MatrixXd mask = net.predict(periodogram(spec).values);
  spec.bins.array() *= mask.array();
  return istft(spec);
}

void save_dnnwf(const std::filesystem::path& path, const MaskNet& net) {
  if (!net.norm) throw UsageError("save_dnnwf: network has no normalisation statistics");
  const Mlp nets[] = {net.net};
  save_checkpoint(path, nets);
  save_norm_stats(path.string() + ".norm", *net.norm);
}

MaskNet load_dnnwf(const std::filesystem::path& path) {
  auto nets = load_checkpoint(path);
  if (nets.size() != 1) throw DataError(path.string() + ": mask checkpoint needs one record");
  MaskNet m;
  m.net = std::move(nets[0]);
  m.norm = load_norm_stats(path.string() + ".norm");
  return m;
}

}  // namespace navae
