// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_DNNWF_HPP_
#define NAVAE_DNNWF_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "navae/data.hpp"
#include "navae/dsp.hpp"
#include "navae/nn.hpp"

namespace navae {

inline constexpr int kMaskHiddenLayers = 5;

// Frame-wise supervised mask estimator: relu hidden layers, sigmoid output.
struct MaskNet {
  Mlp net;
  std::optional<NormStats> norm;

  // 513 -> 5 x 128 relu -> 513 sigmoid by default.
  static MaskNet create(int freq_bins, int hidden_units, int hidden_layers,
                        std::uint64_t seed);
  static MaskNet create_default(std::uint64_t seed);

  Eigen::MatrixXd predict(const Eigen::MatrixXd& noisy_power) const;
};

// |s|^2 / (|s|^2 + |n|^2), denominator floored at 1e-12.
Eigen::MatrixXd ideal_mask(const Eigen::MatrixXd& clean_power,
                           const Eigen::MatrixXd& noise_power);

struct MaskGradient {
  double loss = 0.0;  // mean squared error over every element
  GradBundle grads;
};

MaskGradient mask_loss_and_grad(const MaskNet& net, const Eigen::MatrixXd& noisy_power,
                                const Eigen::MatrixXd& target_mask);
double mask_loss(const MaskNet& net, const Eigen::MatrixXd& noisy_power,
                 const Eigen::MatrixXd& target_mask);

struct MaskTrainOptions {
  int epochs = 50;
  double lr = 1e-3;
  int batch_size = 128;
  std::uint64_t seed = 0;
  NormSource norm_source = NormSource::kNoisy;
  std::function<void(int, double)> on_epoch;
};

// Adam on the mask MSE. Sets net.norm from the training pairs when unset.
std::vector<double> train_dnnwf(MaskNet& net, std::span<const PairedUtterance> pairs,
                                const MaskTrainOptions& options);

// istft(mask * stft(x)).
Waveform enhance_dnnwf(const MaskNet& net, const Waveform& noisy, int frame_len = kFrameLength,
                       int hop = kHop);

void save_dnnwf(const std::filesystem::path& path, const MaskNet& net);
MaskNet load_dnnwf(const std::filesystem::path& path);

}  // namespace navae

#endif  // NAVAE_DNNWF_HPP_
