// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_WAV_HPP_
#define NAVAE_WAV_HPP_

#include <filesystem>

#include "navae/dsp.hpp"

namespace navae {

// Reads a mono 16 kHz RIFF file holding 16-bit PCM or 32-bit float samples.
// PCM samples are scaled by 1/32768.
Waveform load_wav(const std::filesystem::path& path);

// Writes 16-bit PCM. Samples outside [-1, 1) are clipped.
void save_wav(const std::filesystem::path& path, const Waveform& wave);

// 32-bit float variant, used where quantisation must be avoided.
void save_wav_float(const std::filesystem::path& path, const Waveform& wave);

}  // namespace navae

#endif  // NAVAE_WAV_HPP_
