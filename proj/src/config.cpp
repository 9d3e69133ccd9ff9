// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "navae/error.hpp"

namespace navae {

namespace {

enum class Kind { kInt, kU64, kDouble, kBool, kString, kList };

struct KeySpec {
  const char* name;
  Kind kind;
  const char* default_value;
};

// Defaults: 16 kHz audio, 1024-sample sine window with a 256 hop, 2 x 128
// tanh layers, latent dim 16, Adam at 1e-3 (VAE) and 1e-4 (noise-aware
// encoder), NMF rank 8.
constexpr KeySpec kKeys[] = {
    {"seed", Kind::kU64, "1234"},
    {"threads", Kind::kInt, "1"},
    {"frame_len", Kind::kInt, "1024"},
    {"hop", Kind::kInt, "256"},
    {"latent_dim", Kind::kInt, "16"},
    {"hidden_units", Kind::kInt, "128"},
    {"hidden_layers", Kind::kInt, "2"},
    {"batch_size", Kind::kInt, "128"},
    {"vae_epochs", Kind::kInt, "50"},
    {"vae_lr", Kind::kDouble, "0.001"},
    {"nae_epochs", Kind::kInt, "50"},
    {"nae_lr", Kind::kDouble, "0.0001"},
    {"nae_fraction", Kind::kDouble, "1"},
    {"nae_warm_start", Kind::kBool, "false"},
    {"nae_patience", Kind::kInt, "5"},
    {"nae_validation_fraction", Kind::kDouble, "0.1"},
    {"norm_source", Kind::kString, "noisy"},
    {"dnnwf_epochs", Kind::kInt, "50"},
    {"dnnwf_lr", Kind::kDouble, "0.001"},
    {"dnnwf_hidden_layers", Kind::kInt, "5"},
    {"mcem_rank", Kind::kInt, "8"},
    {"mcem_em_iters", Kind::kInt, "100"},
    {"mcem_mh_iters", Kind::kInt, "40"},
    {"mcem_burn_in", Kind::kInt, "10"},
    {"mcem_proposal_std", Kind::kDouble, "0.1"},
    {"gain_in_numerator", Kind::kBool, "true"},
    {"sweep_grid", Kind::kList, "0.01,0.03,0.05,0.10,0.25,0.50"},
    {"vae_checkpoint", Kind::kString, "vae.ckpt"},
    {"nae_checkpoint", Kind::kString, "nae.ckpt"},
    {"dnnwf_checkpoint", Kind::kString, "dnnwf.ckpt"},
};

const KeySpec* find_key(const std::string& key) {
  for (const auto& k : kKeys)
    if (key == k.name) return &k;
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_bool(const std::string& text, bool& out) {
  if (text == "true" || text == "1" || text == "yes") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0" || text == "no") {
    out = false;
    return true;
  }
  return false;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    item = trim(item);
    if (!parse_number(item, v) || !std::isfinite(v))
      throw UsageError("invalid list element '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("empty list");
  return out;
}

void validate(const KeySpec& spec, const std::string& value) {
  bool ok = true;
  switch (spec.kind) {
    case Kind::kInt: {
      int v = 0;
      ok = parse_number(value, v);
      break;
    }
    case Kind::kU64: {
      std::uint64_t v = 0;
      ok = parse_number(value, v);
      break;
    }
    case Kind::kDouble: {
      double v = 0.0;
      ok = parse_number(value, v) && std::isfinite(v);
      break;
    }
    case Kind::kBool: {
      bool v = false;
      ok = parse_bool(value, v);
      break;
    }
    case Kind::kList:
      parse_list(value);
      break;
    case Kind::kString:
      ok = !value.empty();
      break;
  }
  if (!ok)
    throw UsageError("config key '" + std::string(spec.name) + "': invalid value '" +
                     value + "'");
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_[k.name] = k.default_value;
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& k : kKeys) out.emplace_back(k.name);
  return out;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::serialize() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (spec == nullptr) throw UsageError("unknown config key '" + key + "'");
  validate(*spec, value);
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  return it->second;
}

int RunConfig::get_int(const std::string& key) const {
  int v = 0;
  if (!parse_number(get(key), v)) throw UsageError("config key '" + key + "' is not an integer");
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  std::uint64_t v = 0;
  if (!parse_number(get(key), v))
    throw UsageError("config key '" + key + "' is not an unsigned integer");
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  double v = 0.0;
  if (!parse_number(get(key), v)) throw UsageError("config key '" + key + "' is not a number");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  bool v = false;
  if (!parse_bool(get(key), v)) throw UsageError("config key '" + key + "' is not a boolean");
  return v;
}

std::vector<double> RunConfig::get_list(const std::string& key) const {
  return parse_list(get(key));
}

}  // namespace navae
