// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_VAE_HPP_
#define NAVAE_VAE_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "navae/dsp.hpp"
#include "navae/nn.hpp"

namespace navae {

inline constexpr int kLatentDim = 16;
inline constexpr int kHiddenUnits = 128;
// Floor applied to power values fed to encoders and used as recon targets.
inline constexpr double kPowerFloor = 1e-12;

// Per-frame diagonal Gaussian, D x T.
struct DiagGaussian {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd var;

  int dim() const { return static_cast<int>(mean.rows()); }
  int frames() const { return static_cast<int>(mean.cols()); }
};

// R draws, each D x T.
struct LatentSamples {
  std::vector<Eigen::MatrixXd> draws;
};

// F -> hidden... -> 2D, tanh hidden layers, identity head holding
// [mean; log-variance].
Mlp make_encoder(int freq_bins, int latent_dim, std::span<const int> hidden,
                 std::uint64_t seed);
// D -> hidden... -> F, tanh hidden layers, identity log-variance head.
Mlp make_decoder(int freq_bins, int latent_dim, std::span<const int> hidden,
                 std::uint64_t seed);

struct VaeModel {
  Mlp encoder;
  Mlp decoder;
  int latent_dim = kLatentDim;
  int freq_bins = kFrameLength / 2 + 1;

  static VaeModel create(int freq_bins, int latent_dim, std::span<const int> hidden,
                         std::uint64_t seed);
  // 513 -> 128 -> 128 -> (16 + 16) and 16 -> 128 -> 128 -> 513.
  static VaeModel create_default(std::uint64_t seed);
};

// Splits an encoder head output into mean and exp(log-variance).
DiagGaussian split_heads(const Eigen::MatrixXd& head, int latent_dim);

// Floors power at kPowerFloor; throws NumericError on non-finite input.
Eigen::MatrixXd floor_power(const Eigen::MatrixXd& power);

DiagGaussian encode(const VaeModel& model, const Eigen::MatrixXd& power);
DiagGaussian encode(const VaeModel& model, const PowerSpectrogram& power);

// z = mean + sqrt(var) * eps with eps ~ N(0, I) drawn from seed.
LatentSamples reparameterize(const DiagGaussian& g, std::uint64_t seed, int samples = 1);

// Speech variance exp(decoder(z)), F x T.
Eigen::MatrixXd decode(const Mlp& decoder, const Eigen::MatrixXd& z);
Eigen::MatrixXd decode(const VaeModel& model, const Eigen::MatrixXd& z);

// Sum over frames of KL(N(mean, var) || N(0, I)).
double kl_to_standard_normal(const DiagGaussian& g);

// Sum over bins and frames of log v + p / v.
double is_reconstruction(const Eigen::MatrixXd& power, const Eigen::MatrixXd& var);

struct ElboTerms {
  double loss = 0.0;  // kl + recon (negative ELBO up to constants)
  double kl = 0.0;
  double recon = 0.0;
};

struct ElboGradient {
  ElboTerms terms;
  GradBundle encoder;
  GradBundle decoder;
};

/// Negative ELBO summed over the batch (F x B clean power frames), with one
/// reparameterised sample per frame whose noise is drawn from seed.
ElboTerms elbo_loss(const VaeModel& model, const Eigen::MatrixXd& batch,
                    std::uint64_t seed);
ElboGradient elbo_loss_and_grad(const VaeModel& model, const Eigen::MatrixXd& batch,
                                std::uint64_t seed);

struct TrainOptions {
  int epochs = 50;
  double lr = 1e-3;
  int batch_size = 128;
  std::uint64_t seed = 0;
  // Called after every epoch with (epoch, mean loss per frame).
  std::function<void(int, double)> on_epoch;
};

struct TrainHistory {
  std::vector<double> epoch_loss;  // mean loss per frame
};

// Adam on elbo_loss over shuffled mini-batches of the F x N frame matrix.
TrainHistory train_vae(VaeModel& model, const Eigen::MatrixXd& frames,
                       const TrainOptions& options);

// Checkpoint holding the encoder record followed by the decoder record.
void save_vae(const std::filesystem::path& path, const VaeModel& model);
VaeModel load_vae(const std::filesystem::path& path);

// Seed mixing shared by the training loops.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Deterministic minibatch order for one epoch.
std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, std::uint64_t seed);

// Gathers the given columns.
Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m,
                               std::span<const Eigen::Index> cols);

}  // namespace navae

#endif  // NAVAE_VAE_HPP_
