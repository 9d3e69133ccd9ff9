// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_NAE_HPP_
#define NAVAE_NAE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "navae/data.hpp"
#include "navae/nn.hpp"
#include "navae/vae.hpp"

namespace navae {

/// Encoder q(z'|x) over noisy power frames. Same architecture as the clean
/// VAE encoder; its input is globally normalised with norm.
struct NoiseAwareEncoder {
  Mlp net;
  std::optional<NormStats> norm;
  int latent_dim = kLatentDim;

  // Glorot-initialised net with the clean encoder's shape.
  static NoiseAwareEncoder fresh(const VaeModel& vae, std::uint64_t seed);

  // Starts from the clean encoder's parameters, with the normalisation folded
  // into the first layer so that the result equals the clean encoder on raw
  // power: W' = std * W, b' = b + mean * W 1.
  static NoiseAwareEncoder warm_start(const VaeModel& vae, const NormStats& norm);
};

DiagGaussian encode_noisy(const NoiseAwareEncoder& enc, const Eigen::MatrixXd& noisy_power);

// Sum over frames and dims of KL(clean || noisy) between diagonal Gaussians.
double alignment_loss(const DiagGaussian& clean, const DiagGaussian& noisy);

struct AlignmentGradient {
  double loss = 0.0;
  Eigen::MatrixXd d_mean;    // dL / d noisy mean
  Eigen::MatrixXd d_logvar;  // dL / d noisy log-variance
};

AlignmentGradient alignment_loss_and_grad(const DiagGaussian& clean,
                                          const DiagGaussian& noisy);

// Gradient of alignment_loss with respect to the encoder parameters for one
// batch of noisy frames against fixed clean posteriors.
struct NaeBatchGradient {
  double loss = 0.0;
  GradBundle grads;
};
NaeBatchGradient nae_loss_and_grad(const NoiseAwareEncoder& enc,
                                   const Eigen::MatrixXd& noisy_power,
                                   const DiagGaussian& clean_posterior);

struct NaeOptions {
  int epochs = 50;
  double lr = 1e-4;
  int batch_size = 128;
  double fraction = 1.0;
  bool warm_start = false;
  std::uint64_t seed = 0;
  int patience = 5;
  NormSource norm_source = NormSource::kNoisy;
  // Held-out pairs for early stopping; when empty the last epoch is kept.
  std::span<const PairedUtterance> validation;
  // (epoch, mean train KL per frame, mean validation KL per frame or NaN)
  std::function<void(int, double, double)> on_epoch;
};

struct NaeResult {
  NoiseAwareEncoder encoder;
  std::vector<double> train_loss;       // per epoch, mean per frame
  std::vector<double> validation_loss;  // per epoch, empty without validation
  std::vector<std::size_t> selected;    // utterance indices used for training
  int best_epoch = -1;
};

/// Second training stage: fits a noise-aware encoder to the frozen clean
/// encoder's posteriors on ceil(fraction * N) randomly chosen utterances.
NaeResult train_nae(const VaeModel& vae, std::span<const PairedUtterance> pairs,
                    const NaeOptions& options);

// Seeded choice of ceil(fraction * n) distinct utterance indices, ascending.
std::vector<std::size_t> subsample_utterances(std::size_t n, double fraction,
                                              std::uint64_t seed);

// Mean per-frame KL(q_phi(z|s) || q_gamma(z'|x)).
double mean_alignment_kl(const VaeModel& vae, const NoiseAwareEncoder& enc,
                         std::span<const PairedUtterance> pairs);
// Mean per-frame KL(q_phi(z|s) || q_phi(z|x)): the clean encoder fed noisy input.
double mean_clean_encoder_kl(const VaeModel& vae, std::span<const PairedUtterance> pairs);

// Checkpoint at path plus norm stats next to it at path + ".norm".
void save_nae(const std::filesystem::path& path, const NoiseAwareEncoder& enc);
NoiseAwareEncoder load_nae(const std::filesystem::path& path);
std::filesystem::path norm_path_for(const std::filesystem::path& checkpoint);

}  // namespace navae

#endif  // NAVAE_NAE_HPP_
