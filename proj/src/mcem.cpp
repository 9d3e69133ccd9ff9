// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/mcem.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <string>
#include <thread>

#include "navae/error.hpp"

namespace navae {

namespace {

// Frames per decoder call. Fixed so that results do not depend on threads.
constexpr Eigen::Index kBlockFrames = 64;

struct Moments {
  Eigen::ArrayXXd inv;           // mean_r 1 / v
  Eigen::ArrayXXd inv_sq;        // mean_r 1 / v^2
  Eigen::ArrayXXd speech_inv;    // mean_r s / v
  Eigen::ArrayXXd speech_inv_sq; // mean_r s / v^2
};

Moments moments(const NmfState& state, std::span<const Eigen::MatrixXd> samples,
                bool with_speech) {
  const Eigen::ArrayXXd noise = noise_psd(state).array();
  Moments m;
  m.inv = Eigen::ArrayXXd::Zero(noise.rows(), noise.cols());
  m.inv_sq = m.inv;
  if (with_speech) {
    m.speech_inv = m.inv;
    m.speech_inv_sq = m.inv;
  }
  for (const auto& s : samples) {
    const Eigen::ArrayXXd v =
        (s.array().rowwise() * state.g.transpose().array()) + noise;
    const Eigen::ArrayXXd inv = v.inverse();
    m.inv += inv;
    m.inv_sq += inv.square();
    if (with_speech) {
      m.speech_inv += s.array() * inv;
      m.speech_inv_sq += s.array() * inv.square();
    }
  }
  const double r = static_cast<double>(samples.size());
  m.inv /= r;
  m.inv_sq /= r;
  if (with_speech) {
    m.speech_inv /= r;
    m.speech_inv_sq /= r;
  }
  return m;
}

void check_samples(const NmfState& state, std::span<const Eigen::MatrixXd> samples,
                   const Eigen::MatrixXd& power) {
  if (samples.empty()) throw UsageError("M-step needs at least one latent sample");
  if (power.rows() != state.freq_bins() || power.cols() != state.frames())
    throw UsageError("M-step: observation shape does not match NMF state");
  for (const auto& s : samples)
    if (s.rows() != power.rows() || s.cols() != power.cols())
      throw UsageError("M-step: speech sample shape does not match observation");
}

template <typename Derived>
void floor_and_check(Eigen::MatrixBase<Derived>& m, const char* what) {
  if (!m.allFinite()) throw NumericError(std::string("M-step produced non-finite ") + what);
  m = m.cwiseMax(kNmfFloor);
}

}  // namespace

void McemConfig::validate() const {
  if (rank < 1) throw UsageError("MCEM rank must be at least 1");
  if (em_iters < 1) throw UsageError("MCEM needs at least one EM iteration");
  if (mh_iters < 1) throw UsageError("MCEM needs at least one MH iteration");
  if (burn_in < 0 || burn_in >= mh_iters)
    throw UsageError("MCEM burn-in must lie in [0, mh_iters)");
  if (!(proposal_std > 0.0)) throw UsageError("MH proposal std must be positive");
  if (threads < 1) throw UsageError("thread count must be at least 1");
}

NmfState init_nmf(int freq_bins, int frames, const McemConfig& cfg) {
  if (freq_bins < 1 || frames < 1 || cfg.rank < 1)
    throw UsageError("init_nmf: dimensions must be positive");
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x4E4D46));
  std::uniform_real_distribution<double> u(0.1, 1.0);
  NmfState s;
  s.W.resize(freq_bins, cfg.rank);
  s.H.resize(cfg.rank, frames);
  for (Eigen::Index i = 0; i < s.W.size(); ++i) s.W.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < s.H.size(); ++i) s.H.data()[i] = u(rng);
  s.g = Eigen::VectorXd::Ones(frames);
  return s;
}

Eigen::MatrixXd noise_psd(const NmfState& state) {
  if (state.W.cols() != state.H.rows())
    throw UsageError("noise_psd: W and H ranks differ");
  return state.W * state.H;
}

Eigen::VectorXd mixture_var(const Eigen::VectorXd& z, const NmfState& state, int t,
                            const Mlp& decoder) {
  if (t < 0 || t >= state.frames()) throw UsageError("mixture_var: frame out of range");
  const Eigen::VectorXd speech = decode(decoder, z);
  return state.g(t) * speech + state.W * state.H.col(t);
}

double log_target(const Eigen::VectorXd& power, const Eigen::VectorXd& speech_var,
                  const Eigen::VectorXd& noise_var, double gain, const Eigen::VectorXd& z) {
  const Eigen::ArrayXd v = gain * speech_var.array() + noise_var.array();
  return -(v.log() + power.array() / v).sum() - 0.5 * z.squaredNorm();
}

double acceptance_probability(double proposed, double current) {
  const double diff = proposed - current;
  return diff >= 0.0 ? 1.0 : std::exp(diff);
}

// ---------------------------------------------------------- LatentChains

LatentChains::LatentChains(const Mlp& decoder, Eigen::MatrixXd z_init,
                           std::span<const std::uint64_t> frame_seeds)
    : decoder_(&decoder), z_(std::move(z_init)) {
  if (z_.rows() != decoder.input_dim())
    throw UsageError("latent chains: initial latents do not match the decoder");
  if (static_cast<Eigen::Index>(frame_seeds.size()) != z_.cols())
    throw UsageError("latent chains: one seed per frame required");
  for (auto s : frame_seeds) rngs_.emplace_back(s);
  speech_var_.resize(decoder.output_dim(), z_.cols());
  for (Eigen::Index b = 0; b < z_.cols(); b += kBlockFrames) {
    const Eigen::Index len = std::min(kBlockFrames, z_.cols() - b);
    speech_var_.middleCols(b, len) = decode(decoder, z_.middleCols(b, len));
  }
}

LatentChains::Draws LatentChains::sample(const Eigen::MatrixXd& power,
                                         const Eigen::MatrixXd& noise_var,
                                         const Eigen::VectorXd& gain,
                                         const McemConfig& cfg) {
  cfg.validate();
  const Eigen::Index frames = z_.cols();
  if (power.cols() != frames || noise_var.cols() != frames || gain.size() != frames ||
      power.rows() != speech_var_.rows() || noise_var.rows() != speech_var_.rows())
    throw UsageError("E-step: observation, noise model and chains disagree in shape");

  Draws out;
  out.latents.assign(cfg.kept(), Eigen::MatrixXd(z_.rows(), frames));
  out.speech_var.assign(cfg.kept(), Eigen::MatrixXd(speech_var_.rows(), frames));
  out.acceptance = Eigen::VectorXd::Zero(frames);

  const Eigen::Index blocks = (frames + kBlockFrames - 1) / kBlockFrames;
  auto run = [&](Eigen::Index first_block, Eigen::Index stride) {
    for (Eigen::Index b = first_block; b < blocks; b += stride) {
      const Eigen::Index begin = b * kBlockFrames;
      sample_block(begin, std::min(begin + kBlockFrames, frames), power, noise_var, gain,
                   cfg, out);
    }
  };
  const int workers = static_cast<int>(std::min<Eigen::Index>(cfg.threads, blocks));
  if (workers <= 1) {
    run(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(run, w, workers);
    for (auto& th : pool) th.join();
  }
  return out;
}

void LatentChains::sample_block(Eigen::Index begin, Eigen::Index end,
                                const Eigen::MatrixXd& power,
                                const Eigen::MatrixXd& noise_var,
                                const Eigen::VectorXd& gain, const McemConfig& cfg,
                                Draws& out) {
  const Eigen::Index n = end - begin;
  const Eigen::Index dim = z_.rows();
  Eigen::MatrixXd z = z_.middleCols(begin, n);
  Eigen::MatrixXd speech = speech_var_.middleCols(begin, n);
  Eigen::VectorXd current(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Index t = begin + j;
    current(j) = log_target(power.col(t), speech.col(j), noise_var.col(t), gain(t), z.col(j));
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::MatrixXd proposal(dim, n);
  for (int r = 0; r < cfg.mh_iters; ++r) {
    for (Eigen::Index j = 0; j < n; ++j) {
      auto& rng = rngs_[static_cast<std::size_t>(begin + j)];
      // Drop any cached deviate so each frame consumes only its own stream.
      normal.reset();
      for (Eigen::Index d = 0; d < dim; ++d)
        proposal(d, j) = z(d, j) + cfg.proposal_std * normal(rng);
    }
    const Eigen::MatrixXd proposed_speech = decode(*decoder_, proposal);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index t = begin + j;
      auto& rng = rngs_[static_cast<std::size_t>(t)];
      const double candidate = log_target(power.col(t), proposed_speech.col(j),
                                          noise_var.col(t), gain(t), proposal.col(j));
      const double u = uniform(rng);
      if (u < acceptance_probability(candidate, current(j))) {
        z.col(j) = proposal.col(j);
        speech.col(j) = proposed_speech.col(j);
        current(j) = candidate;
        out.acceptance(t) += 1.0;
      }
    }
    if (r >= cfg.burn_in) {
      out.latents[r - cfg.burn_in].middleCols(begin, n) = z;
      out.speech_var[r - cfg.burn_in].middleCols(begin, n) = speech;
    }
  }
  out.acceptance.segment(begin, n) /= static_cast<double>(cfg.mh_iters);
  z_.middleCols(begin, n) = z;
  speech_var_.middleCols(begin, n) = speech;
}

MhResult mh_estep(const Eigen::VectorXd& power, const Eigen::VectorXd& z_init,
                  const NmfState& state, int t, const Mlp& decoder, const McemConfig& cfg,
                  std::uint64_t seed) {
  if (t < 0 || t >= state.frames()) throw UsageError("mh_estep: frame out of range");
  const std::uint64_t seeds[] = {seed};
  LatentChains chains(decoder, z_init, seeds);
  const Eigen::MatrixXd noise = state.W * state.H.col(t);
  const Eigen::VectorXd gain = Eigen::VectorXd::Constant(1, state.g(t));
  const auto draws = chains.sample(power, noise, gain, cfg);
  MhResult r;
  r.kept.resize(z_init.size(), cfg.kept());
  r.speech_var.resize(decoder.output_dim(), cfg.kept());
  for (int k = 0; k < cfg.kept(); ++k) {
    r.kept.col(k) = draws.latents[k].col(0);
    r.speech_var.col(k) = draws.speech_var[k].col(0);
  }
  r.last = chains.latents().col(0);
  r.acceptance_rate = draws.acceptance(0);
  return r;
}

// ----------------------------------------------------------------- M-step

double mc_objective(const Eigen::MatrixXd& power,
                    std::span<const Eigen::MatrixXd> speech_samples, const NmfState& state) {
  check_samples(state, speech_samples, power);
  const Eigen::ArrayXXd noise = noise_psd(state).array();
  double q = 0.0;
  for (const auto& s : speech_samples) {
    const Eigen::ArrayXXd v =
        (s.array().rowwise() * state.g.transpose().array()) + noise;
    q -= (v.log() + power.array() / v).sum();
  }
  return q / static_cast<double>(speech_samples.size());
}

NmfState mstep_update(const NmfState& state, std::span<const Eigen::MatrixXd> speech_samples,
                      const Eigen::MatrixXd& power) {
  check_samples(state, speech_samples, power);
  const Eigen::ArrayXXd p = power.array();
  NmfState next = state;

  {
    const Moments m = moments(next, speech_samples, false);
    const Eigen::ArrayXXd num = (next.W.transpose() * (p * m.inv_sq).matrix()).array();
    const Eigen::ArrayXXd den = (next.W.transpose() * m.inv.matrix()).array();
    next.H.array() *= (num / den).sqrt();
    floor_and_check(next.H, "activations");
  }
  {
    const Moments m = moments(next, speech_samples, false);
    const Eigen::ArrayXXd num = ((p * m.inv_sq).matrix() * next.H.transpose()).array();
    const Eigen::ArrayXXd den = (m.inv.matrix() * next.H.transpose()).array();
    next.W.array() *= (num / den).sqrt();
    floor_and_check(next.W, "dictionary");
  }
  {
    const Moments m = moments(next, speech_samples, true);
    const Eigen::ArrayXd num = (p * m.speech_inv_sq).colwise().sum().transpose();
    const Eigen::ArrayXd den = m.speech_inv.colwise().sum().transpose();
    next.g.array() *= (num / den).sqrt();
    floor_and_check(next.g, "gains");
  }
  return next;
}

Eigen::MatrixXd wiener_mask(const Eigen::MatrixXd& speech_psd, const NmfState& state,
                            bool gain_in_numerator) {
  if (speech_psd.rows() != state.freq_bins() || speech_psd.cols() != state.frames())
    throw UsageError("wiener_mask: speech PSD shape does not match NMF state");
  const Eigen::ArrayXXd scaled =
      speech_psd.array().rowwise() * state.g.transpose().array();
  const Eigen::ArrayXXd total = scaled + noise_psd(state).array();
  return ((gain_in_numerator ? scaled : speech_psd.array()) / total).matrix();
}

// ------------------------------------------------------------------ MCEM

McemResult run_mcem(const Eigen::MatrixXd& power, const Mlp& decoder,
                    const Eigen::MatrixXd& z_init, const McemConfig& cfg) {
  cfg.validate();
  if (power.rows() != decoder.output_dim())
    throw UsageError("run_mcem: observation bins do not match the decoder");
  if (z_init.cols() != power.cols())
    throw UsageError("run_mcem: one initial latent per frame required");
  if (!power.allFinite()) throw NumericError("run_mcem: non-finite observation");

  const int frames = static_cast<int>(power.cols());
  std::vector<std::uint64_t> seeds(frames);
  for (int t = 0; t < frames; ++t) seeds[t] = mix_seed(cfg.seed, 0x3C3E, t);
  LatentChains chains(decoder, z_init, seeds);

  McemResult result;
  result.state = init_nmf(static_cast<int>(power.rows()), frames, cfg);
  LatentChains::Draws draws;
  for (int it = 0; it < cfg.em_iters; ++it) {
    draws = chains.sample(power, noise_psd(result.state), result.state.g, cfg);
    McemIteration diag;
    diag.iter = it;
    diag.acceptance = draws.acceptance.mean();
    diag.q_before = mc_objective(power, draws.speech_var, result.state);
    result.state = mstep_update(result.state, draws.speech_var, power);
    diag.q_after = mc_objective(power, draws.speech_var, result.state);
    result.diagnostics.push_back(diag);
  }

  result.speech_psd = Eigen::MatrixXd::Zero(power.rows(), frames);
  result.latent_mean = Eigen::MatrixXd::Zero(z_init.rows(), frames);
  for (std::size_t r = 0; r < draws.speech_var.size(); ++r) {
    result.speech_psd += draws.speech_var[r];
    result.latent_mean += draws.latents[r];
  }
  result.speech_psd /= static_cast<double>(draws.speech_var.size());
  result.latent_mean /= static_cast<double>(draws.latents.size());
  result.mask = wiener_mask(result.speech_psd, result.state, cfg.gain_in_numerator);
  return result;
}

EnhanceResult enhance(const Waveform& noisy, const VaeModel& vae,
                      const NoiseAwareEncoder* noise_aware, EncoderChoice choice,
                      const McemConfig& cfg) {
  cfg.validate();
  if (vae.encoder.num_layers() == 0 || vae.decoder.num_layers() == 0)
    throw UsageError("enhance: VAE is not loaded");
  ComplexSpectrogram spec = stft(noisy, cfg.frame_len, cfg.hop);
  const Eigen::MatrixXd power = periodogram(spec).values;

  EnhanceResult out;
  if (choice == EncoderChoice::kNoiseAware) {
    if (noise_aware == nullptr || noise_aware->net.num_layers() == 0)
      throw UsageError("enhance: noise-aware encoder requested but not loaded");
    out.z_init = encode_noisy(*noise_aware, power).mean;
  } else {
    out.z_init = encode(vae, power).mean;
  }
  out.mcem = run_mcem(power, vae.decoder, out.z_init, cfg);
  spec.bins.array() *= out.mcem.mask.array();
  out.speech = istft(spec);
  return out;
}

void write_diagnostics_csv(std::ostream& os, std::span<const McemIteration> diagnostics) {
  os << "iter,Q_hat,mean_acceptance\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& d : diagnostics) {
    os << d.iter << ',' << d.q_before << ',' << d.acceptance << '\n';
    os << d.iter << ',' << d.q_after << ',' << d.acceptance << '\n';
  }
}

}  // namespace navae
