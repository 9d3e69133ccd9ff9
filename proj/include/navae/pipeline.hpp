// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_PIPELINE_HPP_
#define NAVAE_PIPELINE_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "navae/config.hpp"
#include "navae/data.hpp"
#include "navae/dnnwf.hpp"
#include "navae/eval.hpp"
#include "navae/mcem.hpp"
#include "navae/nae.hpp"
#include "navae/vae.hpp"

// Glue between the run configuration, manifests and the model modules.
namespace navae {

struct MixedUtterance {
  Waveform speech;
  Mixture mix;
  double snr_db = 0.0;
};

// Loads both files, fits the noise to the speech length from a seeded
// offset and mixes at the entry's SNR. index selects the crop stream.
MixedUtterance mix_entry(const ManifestEntry& entry, std::uint64_t seed, std::size_t index);
std::vector<MixedUtterance> mix_entries(std::span<const ManifestEntry> entries,
                                        std::uint64_t seed);

std::vector<PairedUtterance> to_pairs(std::span<const MixedUtterance> mixed,
                                      const RunConfig& cfg);
std::vector<EvalItem> to_eval_items(std::span<const MixedUtterance> mixed);

struct SynthDataOptions {
  std::uint64_t seed = 0;
  int n_train = 200;
  int n_eval = 40;
  double duration_s = 2.0;
  std::filesystem::path out_dir;
  bool force = false;
};

inline constexpr const char* kManifestName = "manifest.tsv";

/// Writes clean/ and noise/ WAV files plus manifest.tsv under out_dir.
/// Training SNRs are drawn from train_snr_grid(); evaluation utterances
/// cycle through eval_snr_grid().
DatasetManifest write_synth_dataset(const SynthDataOptions& options);

struct TrainValSplit {
  std::vector<PairedUtterance> train;
  std::vector<PairedUtterance> validation;
};

// Holds out round(fraction * n) seeded-random utterances (none if 0).
TrainValSplit split_validation(std::vector<PairedUtterance> pairs, double fraction,
                               std::uint64_t seed);

VaeModel new_vae(const RunConfig& cfg);
MaskNet new_mask_net(const RunConfig& cfg);
TrainOptions vae_options(const RunConfig& cfg);
NaeOptions nae_options(const RunConfig& cfg);
MaskTrainOptions dnnwf_options(const RunConfig& cfg);
McemConfig mcem_config(const RunConfig& cfg);

}  // namespace navae

#endif  // NAVAE_PIPELINE_HPP_
