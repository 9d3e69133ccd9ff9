// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>

#include "navae/error.hpp"

namespace navae {

namespace {

class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double dot(std::span<const double> a, std::span<const double> b) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return s.value();
}

}  // namespace

double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
  if (estimate.size() != reference.size())
    throw UsageError("si_sdr: estimate has " + std::to_string(estimate.size()) +
                     " samples, reference " + std::to_string(reference.size()));
  const double ref_energy = dot(reference, reference);
  if (!(ref_energy > 0.0)) throw UsageError("si_sdr: reference is all zeros");
  const double alpha = dot(estimate, reference) / ref_energy;
  CompensatedSum target, distortion;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = alpha * reference[i];
    target.add(t * t);
    const double e = t - estimate[i];
    distortion.add(e * e);
  }
  return 10.0 * std::log10(target.value() / (distortion.value() + kSiSdrGuard));
}

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  return si_sdr(std::span<const double>(estimate.samples),
                std::span<const double>(reference.samples));
}

MeanCi mean_ci(std::span<const double> values) {
  if (values.size() < 2) throw UsageError("mean_ci: need at least two values");
  const double n = static_cast<double>(values.size());
  CompensatedSum s;
  for (double v : values) s.add(v);
  const double mean = s.value() / n;
  CompensatedSum sq;
  for (double v : values) sq.add((v - mean) * (v - mean));
  const double sd = std::sqrt(sq.value() / (n - 1.0));
  return {mean, 1.96 * sd / std::sqrt(n)};
}

const EvalRow* EvalReport::find(const std::string& system, double snr_db) const {
  for (const auto& r : rows)
    if (r.system == system && r.snr_db == snr_db) return &r;
  return nullptr;
}

EvalReport run_eval(std::span<const EvalItem> items, std::span<const EvalSystem> systems) {
  if (items.empty()) throw UsageError("run_eval: no evaluation utterances");
  std::vector<std::string> names{kUnprocessed};
  for (const auto& s : systems) {
    if (s.name == kUnprocessed || std::count(names.begin(), names.end(), s.name) > 0)
      throw UsageError("run_eval: duplicate system name " + s.name);
    names.push_back(s.name);
  }

  // scores[system][snr] in item order.
  std::vector<std::map<double, std::vector<double>>> scores(names.size());
  for (const auto& item : items) {
    if (item.speech.size() != item.mixture.size())
      throw DataError("run_eval: speech and mixture lengths differ");
    scores[0][item.snr_db].push_back(si_sdr(item.mixture, item.speech));
    for (std::size_t s = 0; s < systems.size(); ++s) {
      const Waveform est = systems[s].enhance(item.mixture);
      if (est.size() != item.speech.size())
        throw DataError("run_eval: system " + systems[s].name +
                        " changed the signal length");
      scores[s + 1][item.snr_db].push_back(si_sdr(est, item.speech));
    }
  }

  EvalReport report;
  for (std::size_t s = 0; s < names.size(); ++s) {
    for (const auto& [snr, vals] : scores[s]) {
      EvalRow row;
      row.system = names[s];
      row.snr_db = snr;
      row.n = vals.size();
      if (vals.size() >= 2) {
        const MeanCi ci = mean_ci(vals);
        row.mean_sisdr = ci.mean;
        row.ci95 = ci.halfwidth;
      } else {
        row.mean_sisdr = vals.front();
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

void write_report_csv(std::ostream& os, const EvalReport& report) {
  os << "system,snr_db,mean_sisdr,ci95,n\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : report.rows)
    os << r.system << ',' << r.snr_db << ',' << r.mean_sisdr << ',' << r.ci95 << ','
       << r.n << '\n';
}

}  // namespace navae
