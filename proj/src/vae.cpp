// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "navae/error.hpp"

namespace navae {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Mlp make_chain(int in, int out, std::span<const int> hidden, std::uint64_t seed) {
  std::vector<int> dims{in};
  std::vector<Activation> acts;
  for (int h : hidden) {
    dims.push_back(h);
    acts.push_back(Activation::kTanh);
  }
  dims.push_back(out);
  acts.push_back(Activation::kIdentity);
  return Mlp::glorot(dims, acts, seed);
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols,
                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd eps(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) eps(r, c) = n(rng);
  return eps;
}

void check_batch(const VaeModel& model, const Eigen::MatrixXd& batch) {
  if (batch.cols() == 0) throw UsageError("elbo_loss: empty batch");
  if (batch.rows() != model.freq_bins)
    throw UsageError("elbo_loss: batch has " + std::to_string(batch.rows()) +
                     " bins, model expects " + std::to_string(model.freq_bins));
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(seed ^ splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL)));
}

std::vector<Eigen::Index> shuffled_indices(Eigen::Index n, std::uint64_t seed) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& m,
                               std::span<const Eigen::Index> cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j)
    out.col(static_cast<Eigen::Index>(j)) = m.col(cols[j]);
  return out;
}

Mlp make_encoder(int freq_bins, int latent_dim, std::span<const int> hidden,
                 std::uint64_t seed) {
  return make_chain(freq_bins, 2 * latent_dim, hidden, seed);
}

Mlp make_decoder(int freq_bins, int latent_dim, std::span<const int> hidden,
                 std::uint64_t seed) {
  return make_chain(latent_dim, freq_bins, hidden, seed);
}

VaeModel VaeModel::create(int freq_bins, int latent_dim, std::span<const int> hidden,
                          std::uint64_t seed) {
  VaeModel m;
  m.freq_bins = freq_bins;
  m.latent_dim = latent_dim;
  m.encoder = make_encoder(freq_bins, latent_dim, hidden, mix_seed(seed, 1));
  m.decoder = make_decoder(freq_bins, latent_dim, hidden, mix_seed(seed, 2));
  return m;
}

VaeModel VaeModel::create_default(std::uint64_t seed) {
  const int hidden[] = {kHiddenUnits, kHiddenUnits};
  return create(kFrameLength / 2 + 1, kLatentDim, hidden, seed);
}

DiagGaussian split_heads(const Eigen::MatrixXd& head, int latent_dim) {
  if (head.rows() != 2 * latent_dim)
    throw UsageError("encoder head has " + std::to_string(head.rows()) +
                     " rows, expected " + std::to_string(2 * latent_dim));
  DiagGaussian g;
  g.mean = head.topRows(latent_dim);
  g.var = head.bottomRows(latent_dim).array().exp();
  return g;
}

Eigen::MatrixXd floor_power(const Eigen::MatrixXd& power) {
  if (!power.allFinite()) throw NumericError("power spectrogram has non-finite values");
  return power.cwiseMax(kPowerFloor);
}

DiagGaussian encode(const VaeModel& model, const Eigen::MatrixXd& power) {
  if (power.rows() != model.freq_bins)
    throw UsageError("encode: input has " + std::to_string(power.rows()) +
                     " bins, model expects " + std::to_string(model.freq_bins));
  return split_heads(model.encoder.apply(floor_power(power)), model.latent_dim);
}

DiagGaussian encode(const VaeModel& model, const PowerSpectrogram& power) {
  return encode(model, power.values);
}

LatentSamples reparameterize(const DiagGaussian& g, std::uint64_t seed, int samples) {
  LatentSamples out;
  const Eigen::MatrixXd sd = g.var.cwiseSqrt();
  for (int r = 0; r < samples; ++r) {
    const Eigen::MatrixXd eps = standard_normal(g.mean.rows(), g.mean.cols(),
                                                mix_seed(seed, static_cast<std::uint64_t>(r)));
    out.draws.push_back(g.mean + sd.cwiseProduct(eps));
  }
  return out;
}

Eigen::MatrixXd decode(const Mlp& decoder, const Eigen::MatrixXd& z) {
  return decoder.apply(z).array().exp();
}

Eigen::MatrixXd decode(const VaeModel& model, const Eigen::MatrixXd& z) {
  if (z.rows() != model.latent_dim)
    throw UsageError("decode: latent has " + std::to_string(z.rows()) +
                     " rows, model expects " + std::to_string(model.latent_dim));
  return decode(model.decoder, z);
}

double kl_to_standard_normal(const DiagGaussian& g) {
  return 0.5 * (g.mean.array().square() + g.var.array() - g.var.array().log() - 1.0).sum();
}

double is_reconstruction(const Eigen::MatrixXd& power, const Eigen::MatrixXd& var) {
  return (var.array().log() + power.array() / var.array()).sum();
}

ElboGradient elbo_loss_and_grad(const VaeModel& model, const Eigen::MatrixXd& batch,
                                std::uint64_t seed) {
  check_batch(model, batch);
  const int d = model.latent_dim;
  const Eigen::MatrixXd target = floor_power(batch);

  const ForwardCache enc = forward(model.encoder, target);
  const Eigen::MatrixXd& head = enc.output();
  const auto mean = head.topRows(d);
  const auto logvar = head.bottomRows(d);
  const Eigen::ArrayXXd var = logvar.array().exp();
  const Eigen::ArrayXXd sd = (0.5 * logvar.array()).exp();
  const Eigen::MatrixXd eps = standard_normal(d, batch.cols(), seed);
  const Eigen::MatrixXd z = mean.array() + sd * eps.array();

  const ForwardCache dec = forward(model.decoder, z);
  const Eigen::ArrayXXd log_speech = dec.output().array();
  const Eigen::ArrayXXd ratio = target.array() * (-log_speech).exp();

  ElboGradient out;
  out.terms.kl = 0.5 * (mean.array().square() + var - logvar.array() - 1.0).sum();
  out.terms.recon = (log_speech + ratio).sum();
  out.terms.loss = out.terms.kl + out.terms.recon;
  if (!std::isfinite(out.terms.loss)) throw NumericError("ELBO loss is not finite");

  const Eigen::MatrixXd d_log_speech = (1.0 - ratio).matrix();
  Backprop dec_back = backward(model.decoder, dec, d_log_speech);
  const Eigen::ArrayXXd dz = dec_back.input_grad.array();

  Eigen::MatrixXd d_head(2 * d, batch.cols());
  d_head.topRows(d) = (mean.array() + dz).matrix();
  d_head.bottomRows(d) = (0.5 * (var - 1.0) + 0.5 * dz * eps.array() * sd).matrix();
  Backprop enc_back = backward(model.encoder, enc, d_head);

  out.encoder = std::move(enc_back.grads);
  out.decoder = std::move(dec_back.grads);
  return out;
}

ElboTerms elbo_loss(const VaeModel& model, const Eigen::MatrixXd& batch,
                    std::uint64_t seed) {
  check_batch(model, batch);
  const int d = model.latent_dim;
  const Eigen::MatrixXd target = floor_power(batch);
  const Eigen::MatrixXd head = model.encoder.apply(target);
  const auto mean = head.topRows(d);
  const auto logvar = head.bottomRows(d);
  const Eigen::MatrixXd eps = standard_normal(d, batch.cols(), seed);
  const Eigen::MatrixXd z = mean.array() + (0.5 * logvar.array()).exp() * eps.array();
  const Eigen::ArrayXXd log_speech = model.decoder.apply(z).array();

  ElboTerms t;
  t.kl = 0.5 * (mean.array().square() + logvar.array().exp() - logvar.array() - 1.0).sum();
  t.recon = (log_speech + target.array() * (-log_speech).exp()).sum();
  t.loss = t.kl + t.recon;
  return t;
}

TrainHistory train_vae(VaeModel& model, const Eigen::MatrixXd& frames,
                       const TrainOptions& options) {
  if (frames.cols() == 0) throw UsageError("train_vae: empty dataset");
  if (options.batch_size <= 0 || options.epochs < 0)
    throw UsageError("train_vae: invalid batch size or epoch count");
  AdamState enc_opt = AdamState::for_net(model.encoder, options.lr);
  AdamState dec_opt = AdamState::for_net(model.decoder, options.lr);

  TrainHistory history;
  const Eigen::Index n = frames.cols();
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const auto order = shuffled_indices(n, mix_seed(options.seed, 0x5A5A, epoch));
    double total = 0.0;
    for (Eigen::Index start = 0, b = 0; start < n; start += options.batch_size, ++b) {
      const Eigen::Index len = std::min<Eigen::Index>(options.batch_size, n - start);
      const Eigen::MatrixXd batch =
          gather_columns(frames, std::span(order).subspan(start, len));
      ElboGradient g = elbo_loss_and_grad(model, batch, mix_seed(options.seed, epoch + 1, b));
      if (!g.encoder.all_finite() || !g.decoder.all_finite())
        throw NumericError("train_vae: non-finite gradient at epoch " +
                           std::to_string(epoch));
      total += g.terms.loss;
      adam_step(model.encoder, g.encoder, enc_opt);
      adam_step(model.decoder, g.decoder, dec_opt);
    }
    const double mean = total / static_cast<double>(n);
    if (!std::isfinite(mean))
      throw NumericError("train_vae: loss diverged at epoch " + std::to_string(epoch));
    history.epoch_loss.push_back(mean);
    if (options.on_epoch) options.on_epoch(epoch, mean);
  }
  return history;
}

void save_vae(const std::filesystem::path& path, const VaeModel& model) {
  const Mlp nets[] = {model.encoder, model.decoder};
  save_checkpoint(path, nets);
}

VaeModel load_vae(const std::filesystem::path& path) {
  auto nets = load_checkpoint(path);
  if (nets.size() != 2)
    throw DataError(path.string() + ": VAE checkpoint needs encoder and decoder records");
  VaeModel m;
  m.encoder = std::move(nets[0]);
  m.decoder = std::move(nets[1]);
  if (m.encoder.output_dim() % 2 != 0 ||
      m.decoder.input_dim() != m.encoder.output_dim() / 2 ||
      m.decoder.output_dim() != m.encoder.input_dim())
    throw DataError(path.string() + ": encoder and decoder shapes do not pair up");
  m.latent_dim = m.decoder.input_dim();
  m.freq_bins = m.encoder.input_dim();
  return m;
}

}  // namespace navae
