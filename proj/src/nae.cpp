// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/nae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "navae/error.hpp"

namespace navae {

namespace {

void check_pair(const DiagGaussian& clean, const DiagGaussian& noisy) {
  if (clean.mean.rows() != noisy.mean.rows() || clean.mean.cols() != noisy.mean.cols() ||
      clean.var.rows() != clean.mean.rows() || clean.var.cols() != clean.mean.cols() ||
      noisy.var.rows() != noisy.mean.rows() || noisy.var.cols() != noisy.mean.cols())
    throw UsageError("alignment_loss: posterior shapes differ");
  if (!(clean.var.array() > 0.0).all() || !(noisy.var.array() > 0.0).all())
    throw NumericError("alignment_loss: variances must be positive");
}

void check_input(const NoiseAwareEncoder& enc, const Eigen::MatrixXd& power) {
  if (!enc.norm) throw UsageError("noise-aware encoder has no normalisation statistics");
  if (power.rows() != enc.net.input_dim())
    throw UsageError("encode_noisy: input has " + std::to_string(power.rows()) +
                     " bins, encoder expects " + std::to_string(enc.net.input_dim()));
  if (!power.allFinite()) throw NumericError("encode_noisy: non-finite input");
}

double mean_kl(const DiagGaussian& clean, const DiagGaussian& other) {
  return alignment_loss(clean, other) / static_cast<double>(clean.frames());
}

}  // namespace

NoiseAwareEncoder NoiseAwareEncoder::fresh(const VaeModel& vae, std::uint64_t seed) {
  std::vector<int> hidden;
  for (std::size_t i = 0; i + 1 < vae.encoder.num_layers(); ++i)
    hidden.push_back(vae.encoder.layer(i).out_dim());
  NoiseAwareEncoder enc;
  enc.net = make_encoder(vae.freq_bins, vae.latent_dim, hidden, seed);
  enc.latent_dim = vae.latent_dim;
  return enc;
}

NoiseAwareEncoder NoiseAwareEncoder::warm_start(const VaeModel& vae, const NormStats& norm) {
  NoiseAwareEncoder enc;
  enc.net = vae.encoder;
  enc.norm = norm;
  enc.latent_dim = vae.latent_dim;
  Layer& first = enc.net.mutable_layer(0);
  first.bias += norm.mean * first.weight.rowwise().sum();
  first.weight *= norm.std;
  return enc;
}

DiagGaussian encode_noisy(const NoiseAwareEncoder& enc, const Eigen::MatrixXd& noisy_power) {
  check_input(enc, noisy_power);
  return split_heads(enc.net.apply(apply_norm(noisy_power, *enc.norm)), enc.latent_dim);
}

double alignment_loss(const DiagGaussian& clean, const DiagGaussian& noisy) {
  check_pair(clean, noisy);
  const auto vc = clean.var.array();
  const auto vn = noisy.var.array();
  const auto diff = clean.mean.array() - noisy.mean.array();
  return (0.5 * (vn.log() - vc.log()) - 0.5 + (vc + diff.square()) / (2.0 * vn)).sum();
}

AlignmentGradient alignment_loss_and_grad(const DiagGaussian& clean,
                                          const DiagGaussian& noisy) {
  AlignmentGradient g;
  g.loss = alignment_loss(clean, noisy);
  const auto vc = clean.var.array();
  const auto vn = noisy.var.array();
  const Eigen::ArrayXXd diff = clean.mean.array() - noisy.mean.array();
  g.d_mean = (-diff / vn).matrix();
  g.d_logvar = (0.5 - (vc + diff.square()) / (2.0 * vn)).matrix();
  return g;
}

NaeBatchGradient nae_loss_and_grad(const NoiseAwareEncoder& enc,
                                   const Eigen::MatrixXd& noisy_power,
                                   const DiagGaussian& clean_posterior) {
  check_input(enc, noisy_power);
  const ForwardCache cache = forward(enc.net, apply_norm(noisy_power, *enc.norm));
  const DiagGaussian noisy = split_heads(cache.output(), enc.latent_dim);
  const AlignmentGradient a = alignment_loss_and_grad(clean_posterior, noisy);
  if (!std::isfinite(a.loss)) throw NumericError("alignment loss is not finite");
  Eigen::MatrixXd d_head(2 * enc.latent_dim, noisy_power.cols());
  d_head.topRows(enc.latent_dim) = a.d_mean;
  d_head.bottomRows(enc.latent_dim) = a.d_logvar;
  NaeBatchGradient out;
  out.loss = a.loss;
  out.grads = backward(enc.net, cache, d_head).grads;
  return out;
}

std::vector<std::size_t> subsample_utterances(std::size_t n, double fraction,
                                              std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw UsageError("fraction must lie in (0, 1], got " + std::to_string(fraction));
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  if (k == 0) throw UsageError("subsample is empty");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

NaeResult train_nae(const VaeModel& vae, std::span<const PairedUtterance> pairs,
                    const NaeOptions& options) {
  if (options.batch_size <= 0 || options.epochs < 0)
    throw UsageError("train_nae: invalid batch size or epoch count");
  NaeResult result;
  result.selected = subsample_utterances(pairs.size(), options.fraction,
                                         mix_seed(options.seed, 0xF4AC));
  std::vector<PairedUtterance> chosen;
  for (std::size_t i : result.selected) chosen.push_back(pairs[i]);

  const NormStats norm = norm_stats_for(chosen, options.norm_source);
  if (options.warm_start) {
    result.encoder = NoiseAwareEncoder::warm_start(vae, norm);
  } else {
    result.encoder = NoiseAwareEncoder::fresh(vae, mix_seed(options.seed, 0x1417));
    result.encoder.norm = norm;
  }
  NoiseAwareEncoder& enc = result.encoder;

  const Eigen::MatrixXd noisy = stack_noisy(chosen);
  // The clean posterior is a fixed target: q_phi is never differentiated.
  const DiagGaussian target = encode(vae, stack_clean(chosen));
  const Eigen::Index n = noisy.cols();
  if (n == 0) throw UsageError("train_nae: selected utterances have no frames");

  std::optional<DiagGaussian> val_target;
  Eigen::MatrixXd val_noisy;
  if (!options.validation.empty()) {
    val_target = encode(vae, stack_clean(options.validation));
    val_noisy = stack_noisy(options.validation);
  }

  AdamState opt = AdamState::for_net(enc.net, options.lr);
  Mlp best = enc.net;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const auto order = shuffled_indices(n, mix_seed(options.seed, 0xE90C, epoch));
    double total = 0.0;
    for (Eigen::Index start = 0; start < n; start += options.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(options.batch_size, n - start);
      const auto cols = std::span(order).subspan(start, len);
      DiagGaussian batch_target{gather_columns(target.mean, cols),
                                gather_columns(target.var, cols)};
      NaeBatchGradient g = nae_loss_and_grad(enc, gather_columns(noisy, cols), batch_target);
      total += g.loss;
      adam_step(enc.net, g.grads, opt);
    }
    const double train = total / static_cast<double>(n);
    if (!std::isfinite(train))
      throw NumericError("train_nae: loss diverged at epoch " + std::to_string(epoch));
    result.train_loss.push_back(train);

    double val = std::numeric_limits<double>::quiet_NaN();
    if (val_target) {
      val = mean_kl(*val_target, encode_noisy(enc, val_noisy));
      result.validation_loss.push_back(val);
      if (val < best_val) {
        best_val = val;
        best = enc.net;
        result.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= options.patience) {
        if (options.on_epoch) options.on_epoch(epoch, train, val);
        break;
      }
    } else {
      result.best_epoch = epoch;
    }
    if (options.on_epoch) options.on_epoch(epoch, train, val);
  }
  if (val_target && result.best_epoch >= 0) enc.net = best;
  return result;
}

double mean_alignment_kl(const VaeModel& vae, const NoiseAwareEncoder& enc,
                         std::span<const PairedUtterance> pairs) {
  return mean_kl(encode(vae, stack_clean(pairs)), encode_noisy(enc, stack_noisy(pairs)));
}

double mean_clean_encoder_kl(const VaeModel& vae, std::span<const PairedUtterance> pairs) {
  return mean_kl(encode(vae, stack_clean(pairs)), encode(vae, stack_noisy(pairs)));
}

std::filesystem::path norm_path_for(const std::filesystem::path& checkpoint) {
  return checkpoint.string() + ".norm";
}

void save_nae(const std::filesystem::path& path, const NoiseAwareEncoder& enc) {
  if (!enc.norm) throw UsageError("save_nae: encoder has no normalisation statistics");
  const Mlp nets[] = {enc.net};
  save_checkpoint(path, nets);
  save_norm_stats(norm_path_for(path), *enc.norm);
}

NoiseAwareEncoder load_nae(const std::filesystem::path& path) {
  auto nets = load_checkpoint(path);
  if (nets.size() != 1)
    throw DataError(path.string() + ": noise-aware checkpoint needs one record");
  NoiseAwareEncoder enc;
  enc.net = std::move(nets[0]);
  if (enc.net.output_dim() % 2 != 0)
    throw DataError(path.string() + ": encoder head must be even-sized");
  enc.latent_dim = enc.net.output_dim() / 2;
  enc.norm = load_norm_stats(norm_path_for(path));
  return enc;
}

}  // namespace navae
