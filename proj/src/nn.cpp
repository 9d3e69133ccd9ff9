// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "navae/nn.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "navae/error.hpp"

namespace navae {

namespace {

constexpr char kMagic[] = "NAVAE1";
constexpr std::size_t kMagicLen = 6;

void activate(Activation act, const Eigen::MatrixXd& pre, Eigen::MatrixXd& out) {
  switch (act) {
    case Activation::kIdentity: out = pre; break;
    case Activation::kTanh: out = pre.array().tanh(); break;
    case Activation::kRelu: out = pre.cwiseMax(0.0); break;
    case Activation::kSigmoid:
      out = (1.0 + (-pre.array()).exp()).inverse();
      break;
  }
}

// Multiplies grad (dL/dOutput) by the activation derivative in place.
void activation_backward(Activation act, const Eigen::MatrixXd& pre,
                         const Eigen::MatrixXd& out, Eigen::MatrixXd& grad) {
  switch (act) {
    case Activation::kIdentity: break;
    case Activation::kTanh:
      grad.array() *= 1.0 - out.array().square();
      break;
    case Activation::kRelu:
      grad.array() *= (pre.array() > 0.0).cast<double>();
      break;
    case Activation::kSigmoid:
      grad.array() *= out.array() * (1.0 - out.array());
      break;
  }
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (v >> (8 * i)) & 0xFF;
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (bits >> (8 * i)) & 0xFF;
  os.write(reinterpret_cast<const char*>(b), 8);
}

void read_exact(std::istream& is, unsigned char* buf, std::size_t n) {
  is.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw DataError("checkpoint truncated");
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  read_exact(is, b, 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  read_exact(is, b, 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string to_string(Activation act) {
  switch (act) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "unknown";
}

// ------------------------------------------------------------------- Mlp

std::uint64_t Mlp::next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

Mlp::Mlp(const Mlp& other) : layers_(other.layers_), version_(other.version_) {}

Mlp& Mlp::operator=(const Mlp& other) {
  if (this != &other) {
    layers_ = other.layers_;
    id_ = next_id();
    version_ = 0;
  }
  return *this;
}

Mlp::Mlp(Mlp&& other) noexcept
    : layers_(std::move(other.layers_)), id_(other.id_), version_(other.version_) {
  other.id_ = next_id();
  other.layers_.clear();
}

Mlp& Mlp::operator=(Mlp&& other) noexcept {
  if (this != &other) {
    layers_ = std::move(other.layers_);
    id_ = other.id_;
    version_ = other.version_;
    other.id_ = next_id();
    other.layers_.clear();
  }
  return *this;
}

void Mlp::validate() const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& l = layers_[i];
    if (l.bias.size() != l.weight.rows())
      throw UsageError("layer " + std::to_string(i) + ": bias size mismatch");
    if (i > 0 && l.in_dim() != layers_[i - 1].out_dim())
      throw UsageError("layer " + std::to_string(i) + ": input dim " +
                       std::to_string(l.in_dim()) + " does not chain with " +
                       std::to_string(layers_[i - 1].out_dim()));
  }
  if (!all_finite()) throw NumericError("network has non-finite parameters");
}

Mlp Mlp::glorot(std::span<const int> dims, std::span<const Activation> activations,
                std::uint64_t seed) {
  if (dims.size() != activations.size() + 1 || activations.empty())
    throw UsageError("Mlp::glorot: need one more dim than activations");
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  for (std::size_t i = 0; i < activations.size(); ++i) {
    const int in = dims[i], out = dims[i + 1];
    if (in <= 0 || out <= 0) throw UsageError("Mlp::glorot: dims must be positive");
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer l;
    l.weight.resize(out, in);
    // Fill row-major so the draw order matches the checkpoint layout.
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) l.weight(r, c) = dist(rng);
    l.bias = Eigen::VectorXd::Zero(out);
    l.activation = activations[i];
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

int Mlp::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
int Mlp::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Layer& Mlp::mutable_layer(std::size_t i) {
  ++version_;
  return layers_.at(i);
}

void Mlp::set_zero() {
  ++version_;
  for (auto& l : layers_) {
    l.weight.setZero();
    l.bias.setZero();
  }
}

bool Mlp::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

bool Mlp::same_parameters(const Mlp& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& a = layers_[i];
    const Layer& b = other.layers_[i];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() ||
        a.weight.cols() != b.weight.cols())
      return false;
    if (std::memcmp(a.weight.data(), b.weight.data(), sizeof(double) * a.weight.size()) != 0 ||
        std::memcmp(a.bias.data(), b.bias.data(), sizeof(double) * a.bias.size()) != 0)
      return false;
  }
  return true;
}

Eigen::MatrixXd Mlp::apply(const Eigen::MatrixXd& input) const {
  if (layers_.empty()) throw UsageError("forward through an empty network");
  if (input.rows() != input_dim())
    throw UsageError("forward: input has " + std::to_string(input.rows()) +
                     " rows, network expects " + std::to_string(input_dim()));
  Eigen::MatrixXd x = input;
  Eigen::MatrixXd pre;
  for (const auto& l : layers_) {
    pre.noalias() = l.weight * x;
    pre.colwise() += l.bias;
    activate(l.activation, pre, x);
  }
  return x;
}

// --------------------------------------------------------- forward/back

ForwardCache forward(const Mlp& net, const Eigen::MatrixXd& input) {
  if (net.num_layers() == 0) throw UsageError("forward through an empty network");
  if (input.rows() != net.input_dim())
    throw UsageError("forward: input has " + std::to_string(input.rows()) +
                     " rows, network expects " + std::to_string(net.input_dim()));
  ForwardCache cache;
  cache.net_id = net.id();
  cache.net_version = net.version();
  cache.activations.reserve(net.num_layers() + 1);
  cache.pre_activations.reserve(net.num_layers());
  cache.activations.push_back(input);
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const Layer& l = net.layer(i);
    Eigen::MatrixXd pre = l.weight * cache.activations.back();
    pre.colwise() += l.bias;
    Eigen::MatrixXd out;
    activate(l.activation, pre, out);
    cache.pre_activations.push_back(std::move(pre));
    cache.activations.push_back(std::move(out));
  }
  return cache;
}

Backprop backward(const Mlp& net, const ForwardCache& cache,
                  const Eigen::MatrixXd& output_grad) {
  if (cache.net_id != net.id() || cache.net_version != net.version() ||
      cache.pre_activations.size() != net.num_layers())
    throw UsageError("backward: stale forward cache");
  if (output_grad.rows() != cache.output().rows() ||
      output_grad.cols() != cache.output().cols())
    throw UsageError("backward: output gradient shape mismatch");

  Backprop result;
  result.grads.weight.resize(net.num_layers());
  result.grads.bias.resize(net.num_layers());
  Eigen::MatrixXd grad = output_grad;
  for (std::size_t k = net.num_layers(); k-- > 0;) {
    const Layer& l = net.layer(k);
    activation_backward(l.activation, cache.pre_activations[k],
                        cache.activations[k + 1], grad);
    result.grads.weight[k].noalias() = grad * cache.activations[k].transpose();
    result.grads.bias[k] = grad.rowwise().sum();
    Eigen::MatrixXd next = l.weight.transpose() * grad;
    grad = std::move(next);
  }
  result.input_grad = std::move(grad);
  return result;
}

// ------------------------------------------------------------ GradBundle

GradBundle GradBundle::zeros_like(const Mlp& net) {
  GradBundle g;
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    const Layer& l = net.layer(i);
    g.weight.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
  }
  return g;
}

GradBundle& GradBundle::operator+=(const GradBundle& other) {
  if (weight.size() != other.weight.size())
    throw UsageError("GradBundle: layer count mismatch");
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] += other.weight[i];
    bias[i] += other.bias[i];
  }
  return *this;
}

GradBundle& GradBundle::operator*=(double scale) {
  for (std::size_t i = 0; i < weight.size(); ++i) {
    weight[i] *= scale;
    bias[i] *= scale;
  }
  return *this;
}

double GradBundle::max_abs() const {
  double m = 0.0;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    if (weight[i].size() > 0) m = std::max(m, weight[i].cwiseAbs().maxCoeff());
    if (bias[i].size() > 0) m = std::max(m, bias[i].cwiseAbs().maxCoeff());
  }
  return m;
}

bool GradBundle::all_finite() const {
  for (std::size_t i = 0; i < weight.size(); ++i)
    if (!weight[i].allFinite() || !bias[i].allFinite()) return false;
  return true;
}

bool GradBundle::matches(const Mlp& net) const {
  if (weight.size() != net.num_layers() || bias.size() != net.num_layers())
    return false;
  for (std::size_t i = 0; i < weight.size(); ++i) {
    const Layer& l = net.layer(i);
    if (weight[i].rows() != l.weight.rows() || weight[i].cols() != l.weight.cols() ||
        bias[i].size() != l.bias.size())
      return false;
  }
  return true;
}

// ------------------------------------------------------------------ Adam

AdamState AdamState::for_net(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  s.first_moment = GradBundle::zeros_like(net);
  s.second_moment = GradBundle::zeros_like(net);
  return s;
}

void adam_step(Mlp& net, const GradBundle& grads, AdamState& state) {
  if (!grads.matches(net)) throw UsageError("adam_step: gradient shapes do not match");
  if (!state.first_moment.matches(net) || !state.second_moment.matches(net))
    throw UsageError("adam_step: optimiser state does not match network");
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    param.array() -= state.lr * (m.array() / c1) /
                     ((v.array() / c2).sqrt() + state.eps);
  };
  for (std::size_t i = 0; i < net.num_layers(); ++i) {
    Layer& l = net.mutable_layer(i);
    update(l.weight, grads.weight[i], state.first_moment.weight[i],
           state.second_moment.weight[i]);
    update(l.bias, grads.bias[i], state.first_moment.bias[i],
           state.second_moment.bias[i]);
  }
}

// ------------------------------------------------------------ grad check

GradCheckReport grad_check(std::span<Mlp* const> nets,
                           std::span<const GradBundle> analytic,
                           const std::function<double()>& loss, double step,
                           double abs_floor) {
  if (nets.size() != analytic.size())
    throw UsageError("grad_check: one gradient bundle per net required");
  GradCheckReport report;
  auto check = [&](double& param, double a, std::size_t n, std::size_t k,
                   bool is_bias, Eigen::Index idx) {
    const double saved = param;
    param = saved + step;
    const double up = loss();
    param = saved - step;
    const double down = loss();
    param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
    const double rel = std::abs(a - numeric) / denom;
    ++report.checked;
    if (report.checked == 1 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.net = n;
      report.layer = k;
      report.bias = is_bias;
      report.index = idx;
      report.analytic = a;
      report.numeric = numeric;
    }
  };
  for (std::size_t n = 0; n < nets.size(); ++n) {
    Mlp& net = *nets[n];
    if (!analytic[n].matches(net)) throw UsageError("grad_check: shape mismatch");
    for (std::size_t k = 0; k < net.num_layers(); ++k) {
      Layer& l = net.mutable_layer(k);
      for (Eigen::Index i = 0; i < l.weight.size(); ++i)
        check(l.weight.data()[i], analytic[n].weight[k].data()[i], n, k, false, i);
      for (Eigen::Index i = 0; i < l.bias.size(); ++i)
        check(l.bias.data()[i], analytic[n].bias[k].data()[i], n, k, true, i);
    }
  }
  return report;
}

// ----------------------------------------------------------- checkpoints

void write_mlp(std::ostream& os, const Mlp& net) {
  os.write(kMagic, kMagicLen);
  put_u32(os, static_cast<std::uint32_t>(net.num_layers()));
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const Layer& l = net.layer(k);
    put_u32(os, static_cast<std::uint32_t>(l.out_dim()));
    put_u32(os, static_cast<std::uint32_t>(l.in_dim()));
    for (int r = 0; r < l.out_dim(); ++r)
      for (int c = 0; c < l.in_dim(); ++c) put_f64(os, l.weight(r, c));
    for (int r = 0; r < l.out_dim(); ++r) put_f64(os, l.bias(r));
    const auto tag = static_cast<char>(l.activation);
    os.write(&tag, 1);
  }
}

Mlp read_mlp(std::istream& is) {
  unsigned char magic[kMagicLen];
  read_exact(is, magic, kMagicLen);
  if (std::memcmp(magic, kMagic, kMagicLen) != 0)
    throw DataError("not a network checkpoint (bad magic)");
  const std::uint32_t count = get_u32(is);
  if (count == 0 || count > 1024) throw DataError("checkpoint: implausible layer count");
  std::vector<Layer> layers;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t out = get_u32(is), in = get_u32(is);
    if (out == 0 || in == 0 || out > (1u << 20) || in > (1u << 20))
      throw DataError("checkpoint: implausible layer shape");
    Layer l;
    l.weight.resize(out, in);
    for (std::uint32_t r = 0; r < out; ++r)
      for (std::uint32_t c = 0; c < in; ++c) l.weight(r, c) = get_f64(is);
    l.bias.resize(out);
    for (std::uint32_t r = 0; r < out; ++r) l.bias(r) = get_f64(is);
    unsigned char tag;
    read_exact(is, &tag, 1);
    if (tag > static_cast<unsigned char>(Activation::kSigmoid))
      throw DataError("checkpoint: unknown activation tag " + std::to_string(tag));
    l.activation = static_cast<Activation>(tag);
    layers.push_back(std::move(l));
  }
  try {
    return Mlp(std::move(layers));
  } catch (const Error& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, std::span<const Mlp> nets) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write checkpoint " + path.string());
  for (const auto& net : nets) write_mlp(os, net);
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

std::vector<Mlp> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  std::vector<Mlp> nets;
  while (is.peek() != std::char_traits<char>::eof()) nets.push_back(read_mlp(is));
  if (nets.empty()) throw DataError("checkpoint " + path.string() + " is empty");
  return nets;
}

}  // namespace navae
