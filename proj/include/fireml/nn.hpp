#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace fireml::nn {

/// Dense n-dimensional value tensor; dim 0 is the batch dimension for
/// batched data. Layout is row-major over `shape`.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);

  std::size_t size() const { return v.size(); }
  int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
  int rank() const { return static_cast<int>(shape.size()); }
};

/// Product of a per-sample shape (no batch dimension).
std::size_t shape_size(const std::vector<int>& shape);
std::string shape_to_string(const std::vector<int>& shape);

enum class Padding { Valid, Same };

/// One differentiable layer. forward caches whatever backward needs;
/// backward consumes that cache, accumulates parameter gradients, and
/// returns the gradient w.r.t. the layer input.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual std::string describe() const;

  /// Per-sample output shape (no batch dimension). Throws on mismatch.
  virtual std::vector<int> out_shape(const std::vector<int>& in) const = 0;

  virtual Tensor forward(const Tensor& in, bool training, std::mt19937_64& rng) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual std::span<double> params() { return {}; }
  virtual std::span<double> grads() { return {}; }
  virtual void init_params(std::mt19937_64&) {}
  void zero_grads();
};

std::unique_ptr<Layer> make_conv2d(int in_channels, int out_channels, int kernel, Padding padding);
std::unique_ptr<Layer> make_maxpool2d(int window, bool ceil_mode);
std::unique_ptr<Layer> make_dense(int in_units, int out_units);
std::unique_ptr<Layer> make_relu();
std::unique_ptr<Layer> make_leaky_relu(double alpha);
std::unique_ptr<Layer> make_dropout(double rate);
std::unique_ptr<Layer> make_flatten();

/// Parse one describe() line back into a layer (for model files).
std::unique_ptr<Layer> layer_from_description(const std::string& line);

/// A feed-forward network of one or two branches; with two branches the
/// flattened branch outputs are concatenated before the trunk layers.
class Network {
 public:
  Network() = default;

  /// input_shapes: one per branch, per-sample (e.g. {5,100,100}).
  void add_branch(std::vector<int> input_shape);
  void add_layer(int branch, std::unique_ptr<Layer> layer);
  void add_trunk_layer(std::unique_ptr<Layer> layer);

  int branch_count() const { return static_cast<int>(branches_.size()); }
  const std::vector<int>& input_shape(int branch) const { return input_shapes_[branch]; }

  /// Seeded He-uniform weight init, zero biases.
  void init(std::uint64_t seed);

  /// Per-layer (kind, per-sample output shape) across branches and trunk,
  /// in execution order. Branch entries are prefixed "a:"/"b:" when there
  /// are two branches.
  std::vector<std::pair<std::string, std::vector<int>>> layer_shapes() const;

  /// Runs the network on one batch (inputs.size() == branch_count(), each
  /// with matching batch size). Dropout is active only when training.
  Tensor forward(const std::vector<Tensor>& inputs, bool training, std::uint64_t seed);

  /// Backpropagates d(loss)/d(output) through the cached forward pass,
  /// accumulating parameter gradients. Throws std::logic_error without a
  /// preceding forward.
  void backward(const Tensor& grad_out);

  void zero_grads();
  std::vector<std::span<double>> param_views();
  std::vector<std::span<double>> grad_views();
  std::size_t param_count();

  void save(std::ostream& out);
  static Network load(std::istream& in);

 private:
  std::vector<std::vector<int>> input_shapes_;
  std::vector<std::vector<std::unique_ptr<Layer>>> branches_;
  std::vector<std::unique_ptr<Layer>> trunk_;
  std::vector<Tensor> branch_outputs_;  // forward cache for the concat join
  bool have_cache_ = false;
};

// ---- optimizers ----

enum class OptimizerKind { Sgd, Adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// params[i] -= learning_rate * grads[i]
void sgd_step(std::span<double> params, std::span<const double> grads, double learning_rate);

/// Standard Adam with bias correction; `offset` indexes this parameter block
/// inside the (m, v) state arrays. Call advance_adam_step once per update
/// before stepping the blocks.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               std::size_t offset, const OptimizerConfig& config);

// ---- reference architectures ----

/// conv3x3->32 (valid, ReLU), maxpool2, conv3x3->64 (ReLU), dropout 0.25,
/// maxpool2, flatten, dense 128, LeakyReLU(0.2), dropout 0.25, dense 1.
/// Input per sample: (in_channels, 100, 100).
Network build_multilayer_cnn(int in_channels = 5);

/// Two same-padding conv encoders (inputs (1,100,100) and (1,30,30), ceil
/// pooling) producing 20- and 10-wide codes, concatenated to 30, then
/// dense 50 (ReLU) and dense 1.
Network build_encoder_cnn();

// ---- training ----

struct NnDataset {
  // branch -> sample -> per-sample tensor
  std::vector<std::vector<Tensor>> branch_inputs;
  std::vector<double> labels;

  std::size_t size() const { return labels.size(); }
};

struct TrainConfig {
  int batch_size = 128;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
};

/// Mini-batch MSE trainer. Owns optimizer state and the shuffling RNG so
/// training can be continued across run() calls.
class Trainer {
 public:
  Trainer(Network& net, const TrainConfig& config);

  /// Trains for `epochs` epochs, returns per-epoch mean training losses
  /// (also appended to history()).
  std::vector<double> run(const NnDataset& data, int epochs);

  const std::vector<double>& history() const { return history_; }

 private:
  Network& net_;
  TrainConfig cfg_;
  AdamState adam_;
  std::mt19937_64 rng_;
  std::vector<double> history_;
};

/// One-shot convenience wrapper around Trainer.
std::vector<double> train(Network& net, const NnDataset& data, int batch_size, int epochs,
                          const OptimizerConfig& optimizer, std::uint64_t seed);

/// Inference on a collection of per-sample inputs; returns one value per
/// sample (network output squeezed to scalar).
std::vector<double> predict(Network& net, const NnDataset& data);

}  // namespace fireml::nn
