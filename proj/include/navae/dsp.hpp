// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_DSP_HPP_
#define NAVAE_DSP_HPP_

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace navae {

inline constexpr int kSampleRate = 16000;
inline constexpr int kFrameLength = 1024;
inline constexpr int kHop = kFrameLength / 4;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

// Framing metadata shared by complex and power spectrograms. num_samples is
// the length of the analysed signal, needed to undo the padding.
struct FrameInfo {
  int frame_len = kFrameLength;
  int hop = kHop;
  int sample_rate = kSampleRate;
  std::size_t num_samples = 0;

  int freq_bins() const { return frame_len / 2 + 1; }
};

// F x T, one column per frame.
struct ComplexSpectrogram {
  Eigen::MatrixXcd bins;
  FrameInfo info;

  int freq_bins() const { return static_cast<int>(bins.rows()); }
  int num_frames() const { return static_cast<int>(bins.cols()); }
};

struct PowerSpectrogram {
  Eigen::MatrixXd values;
  FrameInfo info;

  int freq_bins() const { return static_cast<int>(values.rows()); }
  int num_frames() const { return static_cast<int>(values.cols()); }
};

/// Half-sample-offset sine window, w[n] = sin(pi (n + 0.5) / frame_len).
/// frame_len must be a positive multiple of 4 so that the squared window
/// overlap-adds to a constant at a quarter-frame hop.
std::vector<double> sine_window(int frame_len);

// Zero samples prepended before the first frame (frame_len - hop).
int left_padding(int frame_len, int hop);

// Frames produced for a signal of num_samples. The signal is padded with
// frame_len - hop zeros on the left and at least as many on the right, the
// right side rounded up so that the padded length is whole frames.
int num_frames(std::size_t num_samples, int frame_len, int hop);

ComplexSpectrogram stft(const Waveform& wave, int frame_len = kFrameLength,
                        int hop = kHop);

/// Weighted overlap-add inverse of stft(): synthesis with the same sine
/// window, normalised by the constant squared-window overlap sum.
Waveform istft(const ComplexSpectrogram& spec);

PowerSpectrogram periodogram(const ComplexSpectrogram& spec);

}  // namespace navae

#endif  // NAVAE_DSP_HPP_
