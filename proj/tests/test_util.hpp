// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_TESTS_TEST_UTIL_HPP_
#define NAVAE_TESTS_TEST_UTIL_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "navae/dsp.hpp"

namespace navae::testing {

inline Waveform random_wave(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = d(rng);
  return w;
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed, double lo = -1.0,
                                     double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = d(rng);
  return m;
}

// Power-like matrix spanning several decades.
inline Eigen::MatrixXd random_power(int rows, int cols, std::uint64_t seed) {
  return random_matrix(rows, cols, seed, -3.0, 1.0).unaryExpr([](double x) {
    return std::pow(10.0, x);
  });
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("navae_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace navae::testing

#endif  // NAVAE_TESTS_TEST_UTIL_HPP_
