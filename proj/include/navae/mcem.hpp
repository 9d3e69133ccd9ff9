// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_MCEM_HPP_
#define NAVAE_MCEM_HPP_

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "navae/dsp.hpp"
#include "navae/nae.hpp"
#include "navae/nn.hpp"
#include "navae/vae.hpp"

namespace navae {

// Lower bound for every NMF and gain entry.
inline constexpr double kNmfFloor = 1e-12;

struct McemConfig {
  int rank = 8;
  int em_iters = 100;
  int mh_iters = 40;  // per E-step, burn-in included
  int burn_in = 10;
  double proposal_std = 0.1;
  std::uint64_t seed = 0;
  // Wiener gain g s / (g s + n); false gives s / (g s + n).
  bool gain_in_numerator = true;
  int threads = 1;
  // STFT geometry used by enhance().
  int frame_len = kFrameLength;
  int hop = kHop;

  int kept() const { return mh_iters - burn_in; }
  void validate() const;
};

// Noise variance W H (F x K times K x T) and per-frame speech gain g.
struct NmfState {
  Eigen::MatrixXd W;
  Eigen::MatrixXd H;
  Eigen::VectorXd g;

  int freq_bins() const { return static_cast<int>(W.rows()); }
  int rank() const { return static_cast<int>(W.cols()); }
  int frames() const { return static_cast<int>(H.cols()); }
};

// W, H ~ U(0.1, 1) from cfg.seed, g = 1.
NmfState init_nmf(int freq_bins, int frames, const McemConfig& cfg);

Eigen::MatrixXd noise_psd(const NmfState& state);

// g_t exp(decoder(z)) + (W H)_t for frame t.
Eigen::VectorXd mixture_var(const Eigen::VectorXd& z, const NmfState& state, int t,
                            const Mlp& decoder);

/// Unnormalised log posterior of one latent frame:
/// sum_f [-log v_f - p_f / v_f] - |z|^2 / 2, v = gain * speech_var + noise_var.
double log_target(const Eigen::VectorXd& power, const Eigen::VectorXd& speech_var,
                  const Eigen::VectorXd& noise_var, double gain, const Eigen::VectorXd& z);

// min(1, exp(proposed - current)).
double acceptance_probability(double proposed, double current);

// Per-frame Metropolis-Hastings chains. Each frame owns its RNG stream so
// results do not depend on how frames are grouped or threaded.
class LatentChains {
 public:
  LatentChains(const Mlp& decoder, Eigen::MatrixXd z_init,
               std::span<const std::uint64_t> frame_seeds);

  const Eigen::MatrixXd& latents() const { return z_; }
  const Eigen::MatrixXd& speech_var() const { return speech_var_; }
  int frames() const { return static_cast<int>(z_.cols()); }

  struct Draws {
    std::vector<Eigen::MatrixXd> latents;     // kept samples, D x T each
    std::vector<Eigen::MatrixXd> speech_var;  // kept samples, F x T each
    Eigen::VectorXd acceptance;               // per frame, over all mh_iters
  };

  // One E-step: mh_iters random-walk moves per frame against the given
  // observation and noise model, keeping the samples after burn_in.
  Draws sample(const Eigen::MatrixXd& power, const Eigen::MatrixXd& noise_var,
               const Eigen::VectorXd& gain, const McemConfig& cfg);

 private:
  void sample_block(Eigen::Index begin, Eigen::Index end, const Eigen::MatrixXd& power,
                    const Eigen::MatrixXd& noise_var, const Eigen::VectorXd& gain,
                    const McemConfig& cfg, Draws& out);

  const Mlp* decoder_;
  Eigen::MatrixXd z_;
  Eigen::MatrixXd speech_var_;
  std::vector<std::mt19937_64> rngs_;
};

struct MhResult {
  Eigen::MatrixXd kept;        // D x R_kept
  Eigen::MatrixXd speech_var;  // F x R_kept
  Eigen::VectorXd last;
  double acceptance_rate = 0.0;
};

// Single-frame E-step for frame t of power (an F-vector).
MhResult mh_estep(const Eigen::VectorXd& power, const Eigen::VectorXd& z_init,
                  const NmfState& state, int t, const Mlp& decoder, const McemConfig& cfg,
                  std::uint64_t seed);

/// Monte-Carlo EM objective
/// sum_{f,t} mean_r [-log v_r - p / v_r], v_r = g_t s_r + (W H).
double mc_objective(const Eigen::MatrixXd& power,
                    std::span<const Eigen::MatrixXd> speech_samples, const NmfState& state);

/// Multiplicative M-step: H, then W, then g, each with exponent 1/2, moment
/// terms recomputed between families. Entries are floored at kNmfFloor.
NmfState mstep_update(const NmfState& state, std::span<const Eigen::MatrixXd> speech_samples,
                      const Eigen::MatrixXd& power);

// s / (g s + n), or g s / (g s + n) when gain_in_numerator.
Eigen::MatrixXd wiener_mask(const Eigen::MatrixXd& speech_psd, const NmfState& state,
                            bool gain_in_numerator);

struct McemIteration {
  int iter = 0;
  double q_before = 0.0;  // after the E-step, before the M-step
  double q_after = 0.0;
  double acceptance = 0.0;
};

struct McemResult {
  NmfState state;
  Eigen::MatrixXd speech_psd;   // mean decoder output over the last kept samples
  Eigen::MatrixXd latent_mean;  // mean of the last kept latent samples
  Eigen::MatrixXd mask;
  std::vector<McemIteration> diagnostics;
};

// Runs MCEM on an observed power spectrogram starting from z_init (D x T).
McemResult run_mcem(const Eigen::MatrixXd& power, const Mlp& decoder,
                    const Eigen::MatrixXd& z_init, const McemConfig& cfg);

enum class EncoderChoice { kClean, kNoiseAware };

struct EnhanceResult {
  Waveform speech;
  Eigen::MatrixXd z_init;
  McemResult mcem;
};

/// Encodes |x|^2 with the chosen encoder (posterior mean), runs MCEM with
/// the VAE decoder and applies the Wiener mask to the noisy STFT.
EnhanceResult enhance(const Waveform& noisy, const VaeModel& vae,
                      const NoiseAwareEncoder* noise_aware, EncoderChoice choice,
                      const McemConfig& cfg);

// `iter,Q_hat,mean_acceptance`, two rows per iteration: before and after
// the M-step.
void write_diagnostics_csv(std::ostream& os, std::span<const McemIteration> diagnostics);

}  // namespace navae

#endif  // NAVAE_MCEM_HPP_
