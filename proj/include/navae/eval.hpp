// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_EVAL_HPP_
#define NAVAE_EVAL_HPP_

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "navae/dsp.hpp"

namespace navae {

// Guard added to the distortion energy so that a perfect estimate still
// yields a finite value.
inline constexpr double kSiSdrGuard = 1e-30;

/// Scale-invariant SDR in dB:
/// a = <est, ref> / |ref|^2, 10 log10(|a ref|^2 / (|a ref - est|^2 + guard)).
double si_sdr(std::span<const double> estimate, std::span<const double> reference);
double si_sdr(const Waveform& estimate, const Waveform& reference);

struct MeanCi {
  double mean = 0.0;
  double halfwidth = 0.0;
};

// mean +- 1.96 s / sqrt(n) with the sample standard deviation s; n >= 2.
MeanCi mean_ci(std::span<const double> values);

struct EvalRow {
  std::string system;
  double snr_db = 0.0;
  double mean_sisdr = 0.0;
  double ci95 = 0.0;  // zero when a cell holds a single utterance
  std::size_t n = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;

  const EvalRow* find(const std::string& system, double snr_db) const;
};

struct EvalItem {
  Waveform speech;
  Waveform mixture;
  double snr_db = 0.0;
};

struct EvalSystem {
  std::string name;
  std::function<Waveform(const Waveform& noisy)> enhance;
};

inline constexpr const char* kUnprocessed = "Unprocessed";

/// One row per (system, SNR): an "Unprocessed" row scoring the mixture
/// itself, then every system in order. SNRs ascend within a system.
EvalReport run_eval(std::span<const EvalItem> items, std::span<const EvalSystem> systems);

// `system,snr_db,mean_sisdr,ci95,n`.
void write_report_csv(std::ostream& os, const EvalReport& report);

}  // namespace navae

#endif  // NAVAE_EVAL_HPP_
