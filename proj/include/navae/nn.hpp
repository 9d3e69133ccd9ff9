// Copyright 2026 The navae Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef NAVAE_NN_HPP_
#define NAVAE_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace navae {

// Tag values are part of the checkpoint format.
enum class Activation : std::uint8_t {
  kIdentity = 0,
  kTanh = 1,
  kRelu = 2,
  kSigmoid = 3,
};

std::string to_string(Activation act);

struct Layer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::kIdentity;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

/// Feedforward chain of dense layers. Batches are matrices with one column
/// per sample.
///
/// Every instance carries an identity and a version counter; mutable
/// access bumps the version, which lets backward() reject caches recorded
/// against different parameters.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);
  Mlp(const Mlp& other);
  Mlp& operator=(const Mlp& other);
  Mlp(Mlp&& other) noexcept;
  Mlp& operator=(Mlp&& other) noexcept;

  // Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  // dims has one more entry than activations.
  static Mlp glorot(std::span<const int> dims,
                    std::span<const Activation> activations, std::uint64_t seed);

  int input_dim() const;
  int output_dim() const;
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t parameter_count() const;

  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  Layer& mutable_layer(std::size_t i);
  void set_zero();

  bool all_finite() const;
  bool same_parameters(const Mlp& other) const;

  std::uint64_t id() const { return id_; }
  std::uint64_t version() const { return version_; }

  // Forward pass without caching.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& input) const;

 private:
  void validate() const;

  std::vector<Layer> layers_;
  std::uint64_t id_ = next_id();
  std::uint64_t version_ = 0;

  static std::uint64_t next_id();
};

struct ForwardCache {
  // activations[0] is the input, activations[i + 1] the output of layer i.
  std::vector<Eigen::MatrixXd> activations;
  std::vector<Eigen::MatrixXd> pre_activations;
  std::uint64_t net_id = 0;
  std::uint64_t net_version = 0;

  const Eigen::MatrixXd& output() const { return activations.back(); }
};

struct GradBundle {
  std::vector<Eigen::MatrixXd> weight;
  std::vector<Eigen::VectorXd> bias;

  static GradBundle zeros_like(const Mlp& net);
  GradBundle& operator+=(const GradBundle& other);
  GradBundle& operator*=(double scale);
  double max_abs() const;
  bool all_finite() const;
  bool matches(const Mlp& net) const;
};

struct Backprop {
  GradBundle grads;
  Eigen::MatrixXd input_grad;  // dLoss/dInput, same shape as the input
};

ForwardCache forward(const Mlp& net, const Eigen::MatrixXd& input);

// output_grad is dLoss/dOutput for the cached batch.
Backprop backward(const Mlp& net, const ForwardCache& cache,
                  const Eigen::MatrixXd& output_grad);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  GradBundle first_moment;
  GradBundle second_moment;

  static AdamState for_net(const Mlp& net, double lr);
};

// Bias-corrected Adam update in place. Throws NumericError on non-finite
// gradients before touching any state.
void adam_step(Mlp& net, const GradBundle& grads, AdamState& state);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t net = 0;
  std::size_t layer = 0;
  bool bias = false;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Central-difference check of analytic gradients over every parameter of
/// every net. loss() must read the nets' current parameters. The relative
/// error of one entry is |a - n| / max(|a|, |n|, abs_floor).
GradCheckReport grad_check(std::span<Mlp* const> nets,
                           std::span<const GradBundle> analytic,
                           const std::function<double()>& loss,
                           double step = 1e-5, double abs_floor = 1e-6);

// ------------------------------------------------------------ checkpoints
//
// One record per net: "NAVAE1", u32 layer count, then per layer u32 out,
// u32 in, out*in row-major float64 weights, out float64 biases and an
// activation tag byte. All integers and floats little-endian.

void write_mlp(std::ostream& os, const Mlp& net);
Mlp read_mlp(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, std::span<const Mlp> nets);
std::vector<Mlp> load_checkpoint(const std::filesystem::path& path);

}  // namespace navae

#endif  // NAVAE_NN_HPP_
