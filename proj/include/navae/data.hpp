// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_DATA_HPP_
#define NAVAE_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "navae/dsp.hpp"

namespace navae {

// ---------------------------------------------------------------- mixing

// Mean power over the whole utterance.
double mean_power(const Waveform& wave);

// 10 log10(P_speech / P_noise).
double snr_db(const Waveform& speech, const Waveform& noise);

struct Mixture {
  Waveform mixture;
  Waveform scaled_noise;
  double noise_gain = 1.0;
};

/// Scales noise by sqrt(P_s / (P_n 10^(snr/10))) and adds it to speech.
/// Both inputs must already have equal length (see fit_noise_length).
Mixture mix_at_snr(const Waveform& speech, const Waveform& noise, double snr_db);

// Crops noise to length from a random offset, or loops it when shorter.
Waveform fit_noise_length(const Waveform& noise, std::size_t length,
                          std::mt19937_64& rng);

// SNR grid used when drawing training mixtures: -5..5 dB in 1 dB steps.
std::vector<double> train_snr_grid();
// -10, -5, 0, 5, 10 dB.
std::vector<double> eval_snr_grid();

// -------------------------------------------------------------- manifest

enum class Split { kTrain, kEval };

std::string to_string(Split split);
Split parse_split(const std::string& text);

struct ManifestEntry {
  std::filesystem::path clean_path;
  std::filesystem::path noise_path;
  double snr_db = 0.0;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path root_dir;

  std::vector<ManifestEntry> select(Split split) const;
};

// Tab-separated `clean<TAB>noise<TAB>snr_db<TAB>split` lines, `#` comments.
// Relative paths resolve against the manifest's directory, which becomes
// root_dir. Every referenced file must exist.
DatasetManifest load_manifest(const std::filesystem::path& path);

// Paths are written as stored in the entries.
void save_manifest(const std::filesystem::path& path,
                   const DatasetManifest& manifest);

// ---------------------------------------------------------- normalisation

struct NormStats {
  double mean = 0.0;
  double std = 1.0;
};

// One scalar mean and standard deviation over every bin of every frame.
NormStats compute_norm_stats(std::span<const Eigen::MatrixXd> power);

Eigen::MatrixXd apply_norm(const Eigen::MatrixXd& values, const NormStats& stats);
Eigen::MatrixXd invert_norm(const Eigen::MatrixXd& values, const NormStats& stats);

// Two lines, `mean=<v>` and `std=<v>`, printed with round-trip precision.
void write_norm_stats(std::ostream& os, const NormStats& stats);
NormStats read_norm_stats(std::istream& is);
void save_norm_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats load_norm_stats(const std::filesystem::path& path);

// -------------------------------------------------------- paired frames

// Power spectrograms of one mixed utterance on a common STFT grid.
struct PairedUtterance {
  Eigen::MatrixXd clean;  // |s|^2
  Eigen::MatrixXd noisy;  // |x|^2
  Eigen::MatrixXd noise;  // |n|^2 of the scaled noise

  Eigen::Index frames() const { return clean.cols(); }
};

PairedUtterance make_pair(const Waveform& speech, const Mixture& mix,
                          int frame_len = kFrameLength, int hop = kHop);

// Concatenates one field of every utterance along the frame axis.
Eigen::MatrixXd stack_clean(std::span<const PairedUtterance> pairs);
Eigen::MatrixXd stack_noisy(std::span<const PairedUtterance> pairs);
Eigen::MatrixXd stack_noise(std::span<const PairedUtterance> pairs);

// Which frames of the training pairs feed the normalisation statistics.
enum class NormSource { kNoisy, kClean, kPooled };

std::string to_string(NormSource source);
NormSource parse_norm_source(const std::string& text);

NormStats norm_stats_for(std::span<const PairedUtterance> pairs, NormSource source);

// ------------------------------------------------------- synthetic corpus

enum class NoiseKind { kWhite, kPink, kBandModulated };

std::string to_string(NoiseKind kind);

struct SynthCorpus {
  std::vector<Waveform> clean;
  std::vector<Waveform> noise;
  std::vector<NoiseKind> noise_kinds;
};

/// Deterministic stand-in for a speech/noise corpus. Clean utterances are
/// harmonic stacks (3-8 partials on an 80-300 Hz pitch contour, 2-8 Hz
/// amplitude modulation) separated by digital silence. Noise clips are
/// white, pink or band-passed modulated noise, 1.5x the clean duration so
/// mixing exercises the random crop.
SynthCorpus synth_corpus(std::uint64_t seed, int n_utts, double duration_s);

}  // namespace navae

#endif  // NAVAE_DATA_HPP_
