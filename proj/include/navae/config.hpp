// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_CONFIG_HPP_
#define NAVAE_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace navae {

/// Flat `key = value` run configuration. Every key has a default; unknown
/// keys and values of the wrong type are rejected with UsageError.
class RunConfig {
 public:
  RunConfig();

  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  // All keys, sorted, one `key = value` per line.
  std::string serialize() const;

  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  int get_int(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_list(const std::string& key) const;

  static std::vector<std::string> keys();

  bool operator==(const RunConfig& other) const { return values_ == other.values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace navae

#endif  // NAVAE_CONFIG_HPP_
