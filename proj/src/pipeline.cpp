// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "navae/error.hpp"
#include "navae/wav.hpp"

namespace navae {

MixedUtterance mix_entry(const ManifestEntry& entry, std::uint64_t seed, std::size_t index) {
  MixedUtterance m;
  m.speech = load_wav(entry.clean_path);
  const Waveform noise = load_wav(entry.noise_path);
  std::mt19937_64 rng(mix_seed(seed, 0xC409, index));
  m.mix = mix_at_snr(m.speech, fit_noise_length(noise, m.speech.size(), rng), entry.snr_db);
  m.snr_db = entry.snr_db;
  return m;
}

std::vector<MixedUtterance> mix_entries(std::span<const ManifestEntry> entries,
                                        std::uint64_t seed) {
  std::vector<MixedUtterance> out;
  out.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) out.push_back(mix_entry(entries[i], seed, i));
  return out;
}

std::vector<PairedUtterance> to_pairs(std::span<const MixedUtterance> mixed,
                                      const RunConfig& cfg) {
  std::vector<PairedUtterance> out;
  out.reserve(mixed.size());
  for (const auto& m : mixed)
    out.push_back(make_pair(m.speech, m.mix, cfg.get_int("frame_len"), cfg.get_int("hop")));
  return out;
}

std::vector<EvalItem> to_eval_items(std::span<const MixedUtterance> mixed) {
  std::vector<EvalItem> out;
  for (const auto& m : mixed) out.push_back({m.speech, m.mix.mixture, m.snr_db});
  return out;
}

DatasetManifest write_synth_dataset(const SynthDataOptions& options) {
  namespace fs = std::filesystem;
  if (options.n_train < 0 || options.n_eval < 0 || options.n_train + options.n_eval == 0)
    throw UsageError("synth-data: need a positive number of utterances");
  if (fs::exists(options.out_dir) && !fs::is_empty(options.out_dir) && !options.force)
    throw UsageError("output directory " + options.out_dir.string() +
                     " is not empty (use --force to overwrite)");
  fs::create_directories(options.out_dir / "clean");
  fs::create_directories(options.out_dir / "noise");

  DatasetManifest manifest;
  manifest.root_dir = options.out_dir;
  auto emit = [&](const SynthCorpus& corpus, Split split, auto snr_for) {
    for (std::size_t i = 0; i < corpus.clean.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04zu.wav", to_string(split).c_str(), i);
      const fs::path clean = fs::path("clean") / name;
      const fs::path noise = fs::path("noise") / name;
      save_wav(options.out_dir / clean, corpus.clean[i]);
      save_wav(options.out_dir / noise, corpus.noise[i]);
      manifest.entries.push_back({clean, noise, snr_for(i), split});
    }
  };

  if (options.n_train > 0) {
    const auto grid = train_snr_grid();
    std::mt19937_64 rng(mix_seed(options.seed, 0x5A7));
    std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
    emit(synth_corpus(mix_seed(options.seed, 1), options.n_train, options.duration_s),
         Split::kTrain, [&](std::size_t) { return grid[pick(rng)]; });
  }
  if (options.n_eval > 0) {
    const auto grid = eval_snr_grid();
    emit(synth_corpus(mix_seed(options.seed, 2), options.n_eval, options.duration_s),
         Split::kEval, [&](std::size_t i) { return grid[i % grid.size()]; });
  }
  save_manifest(options.out_dir / kManifestName, manifest);
  return manifest;
}

TrainValSplit split_validation(std::vector<PairedUtterance> pairs, double fraction,
                               std::uint64_t seed) {
  if (fraction < 0.0 || fraction >= 1.0)
    throw UsageError("validation fraction must lie in [0, 1)");
  const auto held = static_cast<std::size_t>(std::round(fraction * pairs.size()));
  std::vector<std::size_t> idx(pairs.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<bool> is_held(pairs.size(), false);
  for (std::size_t i = 0; i < held; ++i) is_held[idx[i]] = true;
  TrainValSplit split;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    (is_held[i] ? split.validation : split.train).push_back(std::move(pairs[i]));
  if (split.train.empty()) throw UsageError("validation split leaves no training data");
  return split;
}

namespace {

std::vector<int> hidden_dims(const RunConfig& cfg) {
  return std::vector<int>(cfg.get_int("hidden_layers"), cfg.get_int("hidden_units"));
}

}  // namespace

VaeModel new_vae(const RunConfig& cfg) {
  const auto hidden = hidden_dims(cfg);
  return VaeModel::create(cfg.get_int("frame_len") / 2 + 1, cfg.get_int("latent_dim"), hidden,
                          mix_seed(cfg.get_u64("seed"), 0x7AE));
}

MaskNet new_mask_net(const RunConfig& cfg) {
  return MaskNet::create(cfg.get_int("frame_len") / 2 + 1, cfg.get_int("hidden_units"),
                         cfg.get_int("dnnwf_hidden_layers"),
                         mix_seed(cfg.get_u64("seed"), 0xD11));
}

TrainOptions vae_options(const RunConfig& cfg) {
  TrainOptions o;
  o.epochs = cfg.get_int("vae_epochs");
  o.lr = cfg.get_double("vae_lr");
  o.batch_size = cfg.get_int("batch_size");
  o.seed = mix_seed(cfg.get_u64("seed"), 0x7A1);
  return o;
}

NaeOptions nae_options(const RunConfig& cfg) {
  NaeOptions o;
  o.epochs = cfg.get_int("nae_epochs");
  o.lr = cfg.get_double("nae_lr");
  o.batch_size = cfg.get_int("batch_size");
  o.fraction = cfg.get_double("nae_fraction");
  o.warm_start = cfg.get_bool("nae_warm_start");
  o.patience = cfg.get_int("nae_patience");
  o.norm_source = parse_norm_source(cfg.get("norm_source"));
  o.seed = mix_seed(cfg.get_u64("seed"), 0x4AE);
  return o;
}

MaskTrainOptions dnnwf_options(const RunConfig& cfg) {
  MaskTrainOptions o;
  o.epochs = cfg.get_int("dnnwf_epochs");
  o.lr = cfg.get_double("dnnwf_lr");
  o.batch_size = cfg.get_int("batch_size");
  o.norm_source = parse_norm_source(cfg.get("norm_source"));
  o.seed = mix_seed(cfg.get_u64("seed"), 0xD1F);
  return o;
}

McemConfig mcem_config(const RunConfig& cfg) {
  McemConfig c;
  c.rank = cfg.get_int("mcem_rank");
  c.em_iters = cfg.get_int("mcem_em_iters");
  c.mh_iters = cfg.get_int("mcem_mh_iters");
  c.burn_in = cfg.get_int("mcem_burn_in");
  c.proposal_std = cfg.get_double("mcem_proposal_std");
  c.gain_in_numerator = cfg.get_bool("gain_in_numerator");
  c.threads = cfg.get_int("threads");
  c.frame_len = cfg.get_int("frame_len");
  c.hop = cfg.get_int("hop");
  c.seed = mix_seed(cfg.get_u64("seed"), 0x3C3);
  c.validate();
  return c;
}

}  // namespace navae
