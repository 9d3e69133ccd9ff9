// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "navae/error.hpp"

namespace navae {

namespace {

// Neumaier-compensated running sum.
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

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw DataError("invalid " + what + ": '" + text + "'");
  return v;
}

}  // namespace

double mean_power(const Waveform& wave) {
  if (wave.samples.empty()) return 0.0;
  CompensatedSum acc;
  for (double v : wave.samples) acc.add(v * v);
  return acc.value() / static_cast<double>(wave.size());
}

double snr_db(const Waveform& speech, const Waveform& noise) {
  return 10.0 * std::log10(mean_power(speech) / mean_power(noise));
}

Mixture mix_at_snr(const Waveform& speech, const Waveform& noise, double snr) {
  if (speech.size() != noise.size())
    throw UsageError("mix_at_snr: speech has " + std::to_string(speech.size()) +
                     " samples, noise has " + std::to_string(noise.size()));
  if (!std::isfinite(snr)) throw UsageError("mix_at_snr: non-finite SNR");
  const double ps = mean_power(speech);
  const double pn = mean_power(noise);
  if (ps <= 0.0) throw DataError("mix_at_snr: speech is silent");
  if (pn <= 0.0) throw DataError("mix_at_snr: noise is silent");

  Mixture m;
  m.noise_gain = std::sqrt(ps / (pn * std::pow(10.0, snr / 10.0)));
  m.scaled_noise.sample_rate = noise.sample_rate;
  m.scaled_noise.samples.resize(noise.size());
  m.mixture.sample_rate = speech.sample_rate;
  m.mixture.samples.resize(speech.size());
  for (std::size_t i = 0; i < speech.size(); ++i) {
    m.scaled_noise.samples[i] = m.noise_gain * noise.samples[i];
    m.mixture.samples[i] = speech.samples[i] + m.scaled_noise.samples[i];
  }
  return m;
}

Waveform fit_noise_length(const Waveform& noise, std::size_t length,
                          std::mt19937_64& rng) {
  if (noise.samples.empty()) throw DataError("noise signal is empty");
  Waveform out;
  out.sample_rate = noise.sample_rate;
  out.samples.resize(length);
  if (noise.size() >= length) {
    std::uniform_int_distribution<std::size_t> pick(0, noise.size() - length);
    const std::size_t offset = pick(rng);
    std::copy_n(noise.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                length, out.samples.begin());
  } else {
    for (std::size_t i = 0; i < length; ++i)
      out.samples[i] = noise.samples[i % noise.size()];
  }
  return out;
}

std::vector<double> train_snr_grid() {
  std::vector<double> grid;
  for (int s = -5; s <= 5; ++s) grid.push_back(s);
  return grid;
}

std::vector<double> eval_snr_grid() { return {-10.0, -5.0, 0.0, 5.0, 10.0}; }

std::string to_string(Split split) {
  return split == Split::kTrain ? "train" : "eval";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::kTrain;
  if (text == "eval") return Split::kEval;
  throw DataError("unknown split '" + text + "' (expected train or eval)");
}

std::vector<ManifestEntry> DatasetManifest::select(Split split) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(e);
  return out;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest " + path.string());
  DatasetManifest manifest;
  manifest.root_dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;

    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (fields.size() != 4)
      throw DataError(where + ": expected 4 tab-separated fields, got " +
                      std::to_string(fields.size()));
    ManifestEntry e;
    auto resolve = [&](const std::string& p) {
      std::filesystem::path fp(p);
      return fp.is_absolute() ? fp : manifest.root_dir / fp;
    };
    e.clean_path = resolve(fields[0]);
    e.noise_path = resolve(fields[1]);
    e.snr_db = parse_double(trim(fields[2]), "SNR at " + where);
    e.split = parse_split(trim(fields[3]));
    for (const auto& p : {e.clean_path, e.noise_path})
      if (!std::filesystem::exists(p))
        throw DataError(where + ": missing file " + p.string());
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void save_manifest(const std::filesystem::path& path,
                   const DatasetManifest& manifest) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write manifest " + path.string());
  os << "# clean\tnoise\tsnr_db\tsplit\n";
  for (const auto& e : manifest.entries) {
    os << e.clean_path.generic_string() << '\t' << e.noise_path.generic_string()
       << '\t' << e.snr_db << '\t' << to_string(e.split) << '\n';
  }
  if (!os) throw DataError("failed writing manifest " + path.string());
}

NormStats compute_norm_stats(std::span<const Eigen::MatrixXd> power) {
  CompensatedSum sum;
  std::size_t count = 0;
  for (const auto& m : power) {
    for (Eigen::Index i = 0; i < m.size(); ++i) sum.add(m.data()[i]);
    count += static_cast<std::size_t>(m.size());
  }
  if (count == 0) throw DataError("normalisation statistics: empty dataset");
  const double mean = sum.value() / static_cast<double>(count);
  CompensatedSum sq;
  for (const auto& m : power)
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double d = m.data()[i] - mean;
      sq.add(d * d);
    }
  const double std = std::sqrt(sq.value() / static_cast<double>(count));
  if (!std::isfinite(mean) || !std::isfinite(std))
    throw NumericError("normalisation statistics are not finite");
  if (std <= 0.0) throw DataError("normalisation statistics: zero variance");
  return {mean, std};
}

Eigen::MatrixXd apply_norm(const Eigen::MatrixXd& values, const NormStats& stats) {
  return (values.array() - stats.mean) / stats.std;
}

Eigen::MatrixXd invert_norm(const Eigen::MatrixXd& values, const NormStats& stats) {
  return values.array() * stats.std + stats.mean;
}

void write_norm_stats(std::ostream& os, const NormStats& stats) {
  os << std::setprecision(std::numeric_limits<double>::max_digits10)
     << "mean=" << stats.mean << "\nstd=" << stats.std << "\n";
}

NormStats read_norm_stats(std::istream& is) {
  NormStats stats;
  bool have_mean = false, have_std = false;
  std::string line;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("bad norm stats line: " + line);
    const std::string key = trim(line.substr(0, eq));
    const double v = parse_double(trim(line.substr(eq + 1)), "norm stat " + key);
    if (key == "mean") {
      stats.mean = v;
      have_mean = true;
    } else if (key == "std") {
      stats.std = v;
      have_std = true;
    } else {
      throw DataError("unknown norm stats key: " + key);
    }
  }
  if (!have_mean || !have_std) throw DataError("norm stats need mean= and std=");
  if (stats.std <= 0.0) throw DataError("norm stats: std must be positive");
  return stats;
}

void save_norm_stats(const std::filesystem::path& path, const NormStats& stats) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  write_norm_stats(os, stats);
}

NormStats load_norm_stats(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open norm stats " + path.string());
  return read_norm_stats(is);
}

PairedUtterance make_pair(const Waveform& speech, const Mixture& mix, int frame_len,
                          int hop) {
  PairedUtterance p;
  p.clean = periodogram(stft(speech, frame_len, hop)).values;
  p.noisy = periodogram(stft(mix.mixture, frame_len, hop)).values;
  p.noise = periodogram(stft(mix.scaled_noise, frame_len, hop)).values;
  return p;
}

namespace {

template <typename Field>
Eigen::MatrixXd stack(std::span<const PairedUtterance> pairs, Field field) {
  Eigen::Index cols = 0, rows = 0;
  for (const auto& p : pairs) {
    cols += (p.*field).cols();
    rows = (p.*field).rows();
  }
  Eigen::MatrixXd out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& p : pairs) {
    const auto& m = p.*field;
    if (m.rows() != rows) throw UsageError("paired frames have inconsistent bin counts");
    out.middleCols(at, m.cols()) = m;
    at += m.cols();
  }
  return out;
}

}  // namespace

Eigen::MatrixXd stack_clean(std::span<const PairedUtterance> pairs) {
  return stack(pairs, &PairedUtterance::clean);
}
Eigen::MatrixXd stack_noisy(std::span<const PairedUtterance> pairs) {
  return stack(pairs, &PairedUtterance::noisy);
}
Eigen::MatrixXd stack_noise(std::span<const PairedUtterance> pairs) {
  return stack(pairs, &PairedUtterance::noise);
}

std::string to_string(NormSource source) {
  switch (source) {
    case NormSource::kNoisy: return "noisy";
    case NormSource::kClean: return "clean";
    case NormSource::kPooled: return "pooled";
  }
  return "unknown";
}

NormSource parse_norm_source(const std::string& text) {
  if (text == "noisy") return NormSource::kNoisy;
  if (text == "clean") return NormSource::kClean;
  if (text == "pooled") return NormSource::kPooled;
  throw UsageError("unknown normalisation source '" + text +
                   "' (expected noisy, clean or pooled)");
}

NormStats norm_stats_for(std::span<const PairedUtterance> pairs, NormSource source) {
  std::vector<Eigen::MatrixXd> mats;
  for (const auto& p : pairs) {
    if (source != NormSource::kClean) mats.push_back(p.noisy);
    if (source != NormSource::kNoisy) mats.push_back(p.clean);
  }
  return compute_norm_stats(mats);
}

}  // namespace navae
