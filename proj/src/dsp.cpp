// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <string>

#include <fftw3.h>

#include "navae/error.hpp"

namespace navae {

namespace {

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n)
      : n_(n),
        time_(fftw_alloc_real(n)),
        freq_(fftw_alloc_complex(n / 2 + 1)) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    forward_ = fftw_plan_dft_r2c_1d(n, time_, freq_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(n, freq_, time_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
    fftw_free(time_);
    fftw_free(freq_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* time() { return time_; }
  std::complex<double>* freq() {
    return reinterpret_cast<std::complex<double>*>(freq_);
  }
  void forward() { fftw_execute(forward_); }
  // c2r destroys its input; callers refill freq() before each call.
  void inverse() { fftw_execute(inverse_); }
  int size() const { return n_; }

 private:
  int n_;
  double* time_;
  fftw_complex* freq_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

void check_geometry(int frame_len, int hop) {
  if (frame_len < 4 || frame_len % 4 != 0)
    throw UsageError("frame length must be a positive multiple of 4, got " +
                     std::to_string(frame_len));
  if (hop <= 0 || hop > frame_len)
    throw UsageError("hop must be in [1, frame_len], got " +
                     std::to_string(hop));
}

// Squared-window overlap sum; throws if it is not constant along n.
double cola_constant(const std::vector<double>& window, int hop) {
  const int n = static_cast<int>(window.size());
  double first = 0.0;
  for (int i = 0; i < hop; ++i) {
    double sum = 0.0;
    for (int k = i; k < n; k += hop) sum += window[k] * window[k];
    if (i == 0) {
      first = sum;
    } else if (std::abs(sum - first) > 1e-12 * first) {
      throw UsageError("hop " + std::to_string(hop) +
                       " does not give a constant squared-window overlap");
    }
  }
  return first;
}

}  // namespace

std::vector<double> sine_window(int frame_len) {
  if (frame_len < 4 || frame_len % 4 != 0)
    throw UsageError("sine window length must be a positive multiple of 4, got " +
                     std::to_string(frame_len));
  std::vector<double> w(frame_len);
  for (int n = 0; n < frame_len; ++n)
    w[n] = std::sin(std::numbers::pi * (n + 0.5) / frame_len);
  return w;
}

int left_padding(int frame_len, int hop) { return frame_len - hop; }

int num_frames(std::size_t num_samples, int frame_len, int hop) {
  const std::size_t pad = static_cast<std::size_t>(left_padding(frame_len, hop));
  const std::size_t rem = num_samples % hop;
  const std::size_t right = pad + (rem == 0 ? 0 : hop - rem);
  const std::size_t padded = num_samples + pad + right;
  return static_cast<int>((padded - frame_len) / hop + 1);
}

ComplexSpectrogram stft(const Waveform& wave, int frame_len, int hop) {
  check_geometry(frame_len, hop);
  if (wave.samples.empty()) throw UsageError("stft: empty signal");
  for (double v : wave.samples)
    if (!std::isfinite(v)) throw NumericError("stft: non-finite sample");

  const auto window = sine_window(frame_len);
  const int frames = num_frames(wave.size(), frame_len, hop);
  const long pad = left_padding(frame_len, hop);
  const long len = static_cast<long>(wave.size());

  ComplexSpectrogram spec;
  spec.info = {frame_len, hop, wave.sample_rate, wave.size()};
  spec.bins.resize(frame_len / 2 + 1, frames);

  RealFft fft(frame_len);
  for (int t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * hop - pad;
    double* buf = fft.time();
    for (int n = 0; n < frame_len; ++n) {
      const long i = start + n;
      buf[n] = (i >= 0 && i < len) ? wave.samples[i] * window[n] : 0.0;
    }
    fft.forward();
    const std::complex<double>* out = fft.freq();
    for (int f = 0; f <= frame_len / 2; ++f) spec.bins(f, t) = out[f];
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec) {
  const FrameInfo& info = spec.info;
  check_geometry(info.frame_len, info.hop);
  if (spec.freq_bins() != info.freq_bins())
    throw UsageError("istft: " + std::to_string(spec.freq_bins()) +
                     " bins inconsistent with frame length " +
                     std::to_string(info.frame_len));
  if (spec.num_frames() != num_frames(info.num_samples, info.frame_len, info.hop))
    throw UsageError("istft: frame count inconsistent with signal length");

  const int n = info.frame_len;
  const auto window = sine_window(n);
  const double norm = cola_constant(window, info.hop) * n;
  const long pad = left_padding(n, info.hop);
  const long len = static_cast<long>(info.num_samples);

  Waveform out;
  out.sample_rate = info.sample_rate;
  out.samples.assign(info.num_samples, 0.0);

  RealFft fft(n);
  for (int t = 0; t < spec.num_frames(); ++t) {
    std::complex<double>* in = fft.freq();
    for (int f = 0; f <= n / 2; ++f) in[f] = spec.bins(f, t);
    // A real signal has real DC and Nyquist bins.
    in[0].imag(0.0);
    in[n / 2].imag(0.0);
    fft.inverse();
    const double* frame = fft.time();
    const long start = static_cast<long>(t) * info.hop - pad;
    for (int k = 0; k < n; ++k) {
      const long i = start + k;
      if (i >= 0 && i < len) out.samples[i] += frame[k] * window[k];
    }
  }
  for (double& v : out.samples) v /= norm;
  return out;
}

PowerSpectrogram periodogram(const ComplexSpectrogram& spec) {
  PowerSpectrogram p;
  p.info = spec.info;
  p.values = spec.bins.cwiseAbs2();
  return p;
}

}  // namespace navae
