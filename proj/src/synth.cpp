// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "navae/data.hpp"
#include "navae/error.hpp"

namespace navae {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  int integer(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  double normal() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

void scale_to_rms(std::vector<double>& x, double rms) {
  double p = 0.0;
  for (double v : x) p += v * v;
  p = std::sqrt(p / static_cast<double>(x.size()));
  if (p > 0.0)
    for (double& v : x) v *= rms / p;
}

// Splits total into parts proportional to the given weights; the last part
// takes the rounding remainder.
std::vector<std::size_t> split_lengths(std::size_t total,
                                       const std::vector<double>& weights) {
  double sum = 0.0;
  for (double w : weights) sum += w;
  std::vector<std::size_t> out(weights.size());
  std::size_t used = 0;
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    out[i] = static_cast<std::size_t>(std::floor(total * weights[i] / sum));
    used += out[i];
  }
  out.back() = total - used;
  return out;
}

void voiced_segment(Rng& rng, double* out, std::size_t len) {
  const double fs = kSampleRate;
  const double f0_start = rng.uniform(90.0, 260.0);
  const double glide = rng.uniform(-0.25, 0.25);
  const double vib_rate = rng.uniform(3.0, 6.0);
  const double vib_depth = rng.uniform(0.0, 0.03);
  const int partials = rng.integer(3, 8);
  const double tilt = rng.uniform(0.5, 1.5);
  std::vector<double> amp(partials);
  for (int h = 0; h < partials; ++h)
    amp[h] = std::pow(h + 1.0, -tilt) * rng.uniform(0.5, 1.5);
  const double am_rate = rng.uniform(2.0, 8.0);
  const double am_phase = rng.uniform(0.0, kTwoPi);
  const double am_depth = rng.uniform(0.2, 0.6);
  const std::size_t ramp = std::min<std::size_t>(160, len / 4);

  double phase = rng.uniform(0.0, kTwoPi);
  const double duration = static_cast<double>(len) / fs;
  for (std::size_t i = 0; i < len; ++i) {
    const double t = static_cast<double>(i) / fs;
    double f0 = f0_start * (1.0 + glide * t / duration) *
                (1.0 + vib_depth * std::sin(kTwoPi * vib_rate * t));
    f0 = std::clamp(f0, 80.0, 300.0);
    phase += kTwoPi * f0 / fs;
    double v = 0.0;
    for (int h = 0; h < partials; ++h) v += amp[h] * std::sin((h + 1) * phase);
    double env = 1.0 - am_depth * 0.5 * (1.0 + std::sin(kTwoPi * am_rate * t + am_phase));
    if (i < ramp)
      env *= 0.5 * (1.0 - std::cos(std::numbers::pi * i / ramp));
    else if (len - i <= ramp)
      env *= 0.5 * (1.0 - std::cos(std::numbers::pi * (len - i) / ramp));
    out[i] = v * env;
  }
}

Waveform clean_utterance(Rng& rng, std::size_t len) {
  Waveform w;
  w.samples.assign(len, 0.0);
  const int voiced = rng.integer(2, 4);
  const double silent_frac = rng.uniform(0.15, 0.35);
  const std::size_t silent = static_cast<std::size_t>(std::round(silent_frac * len));

  std::vector<double> gap_w(voiced + 1), seg_w(voiced);
  for (double& g : gap_w) g = rng.uniform(0.3, 1.0);
  for (double& s : seg_w) s = rng.uniform(0.5, 1.5);
  const auto gaps = split_lengths(silent, gap_w);
  const auto segs = split_lengths(len - silent, seg_w);

  std::size_t pos = gaps[0];
  for (int s = 0; s < voiced; ++s) {
    voiced_segment(rng, w.samples.data() + pos, segs[s]);
    pos += segs[s] + gaps[s + 1];
  }
  scale_to_rms(w.samples, rng.uniform(0.03, 0.12));
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.9)
    for (double& v : w.samples) v *= 0.9 / peak;
  return w;
}

// RBJ band-pass biquad, constant 0 dB peak gain.
struct Biquad {
  double b0, b1, b2, a1, a2;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;

  static Biquad band_pass(double fc, double q) {
    const double w0 = kTwoPi * fc / kSampleRate;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double a0 = 1.0 + alpha;
    return {alpha / a0, 0.0, -alpha / a0, -2.0 * std::cos(w0) / a0,
            (1.0 - alpha) / a0};
  }
  double operator()(double x) {
    const double y = b0 * x + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x;
    y2 = y1;
    y1 = y;
    return y;
  }
};

Waveform noise_clip(Rng& rng, NoiseKind kind, std::size_t len) {
  Waveform w;
  w.samples.resize(len);
  switch (kind) {
    case NoiseKind::kWhite:
      for (double& v : w.samples) v = rng.normal();
      break;
    case NoiseKind::kPink: {
      // Kellet's refined filter: power falls as 1/f over the audio band.
      double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
      for (double& v : w.samples) {
        const double white = rng.normal();
        b0 = 0.99886 * b0 + white * 0.0555179;
        b1 = 0.99332 * b1 + white * 0.0750759;
        b2 = 0.96900 * b2 + white * 0.1538520;
        b3 = 0.86650 * b3 + white * 0.3104856;
        b4 = 0.55000 * b4 + white * 0.5329522;
        b5 = -0.7616 * b5 - white * 0.0168980;
        v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
        b6 = white * 0.115926;
      }
      break;
    }
    case NoiseKind::kBandModulated: {
      const double fc = rng.uniform(300.0, 4000.0);
      const double q = rng.uniform(0.7, 3.0);
      Biquad first = Biquad::band_pass(fc, q), second = Biquad::band_pass(fc, q);
      const double rate = rng.uniform(0.5, 4.0);
      const double depth = rng.uniform(0.3, 0.9);
      const double phase = rng.uniform(0.0, kTwoPi);
      for (std::size_t i = 0; i < len; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        const double env = 1.0 - depth * 0.5 * (1.0 + std::sin(kTwoPi * rate * t + phase));
        w.samples[i] = env * second(first(rng.normal()));
      }
      break;
    }
  }
  scale_to_rms(w.samples, 0.1);
  return w;
}

}  // namespace

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kPink: return "pink";
    case NoiseKind::kBandModulated: return "band";
  }
  return "unknown";
}

SynthCorpus synth_corpus(std::uint64_t seed, int n_utts, double duration_s) {
  if (n_utts < 1) throw UsageError("synth_corpus: need at least one utterance");
  if (!(duration_s > 0.1)) throw UsageError("synth_corpus: duration must exceed 0.1 s");
  const auto len = static_cast<std::size_t>(std::round(duration_s * kSampleRate));
  const auto noise_len = len + len / 2;

  SynthCorpus corpus;
  for (int u = 0; u < n_utts; ++u) {
    Rng rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(u))));
    corpus.clean.push_back(clean_utterance(rng, len));
    const auto kind = static_cast<NoiseKind>(rng.integer(0, 2));
    corpus.noise_kinds.push_back(kind);
    corpus.noise.push_back(noise_clip(rng, kind, noise_len));
  }
  return corpus;
}

}  // namespace navae
