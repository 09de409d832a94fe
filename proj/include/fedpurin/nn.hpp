#pragma once

// Dense multilayer perceptron with exact backpropagation over a flat
// parameter vector. Each dense layer stores its weights row-major as
// [output_dim x input_dim] followed by the bias, and owns one LayerRange in
// the layout; activation layers own no parameters.

#include <cstdint>
#include <span>
#include <vector>

#include "fedpurin/dataset.hpp"
#include "fedpurin/param_vector.hpp"

namespace fedpurin::nn {

enum class LayerKind { dense, activation };

/// softmax_cross_entropy is only valid as the final layer. A final identity
/// activation (or a final dense layer) selects the squared-error loss used by
/// the regression harness.
enum class Activation { relu, identity, softmax_cross_entropy };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::identity;

  static LayerSpec dense(std::size_t in, std::size_t out) {
    return {LayerKind::dense, in, out, Activation::identity};
  }
  static LayerSpec act(Activation a, std::size_t dim) { return {LayerKind::activation, dim, dim, a}; }

  bool operator==(const LayerSpec&) const = default;
};

/// Validated layer stack.
class Architecture {
 public:
  explicit Architecture(std::vector<LayerSpec> layers);

  /// input -> [dense, relu] per hidden width -> dense -> softmax-CE.
  static Architecture mlp(std::size_t input_dim, std::span<const std::size_t> hidden,
                          std::size_t num_classes);

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const Layout& layout() const noexcept { return layout_; }
  std::size_t param_count() const noexcept { return param_count_; }
  std::size_t input_dim() const noexcept { return layers_.front().input_dim; }
  std::size_t output_dim() const noexcept { return layers_.back().output_dim; }
  bool classification() const noexcept {
    return layers_.back().activation == Activation::softmax_cross_entropy;
  }
  /// Range of the final dense layer (the classifier head).
  const LayerRange& classifier() const noexcept { return layout_.back(); }

  /// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  ParamVector initialize(std::uint64_t seed) const;
  ParamVector zeros() const { return ParamVector(std::vector<double>(param_count_, 0.0), layout_); }

 private:
  std::vector<LayerSpec> layers_;
  Layout layout_;
  std::size_t param_count_ = 0;
};

struct Batch {
  Matrix inputs;
  std::vector<std::size_t> labels;
  /// Regression targets [batch x outputs]; required only for squared-error
  /// models.
  Matrix targets;

  std::size_t size() const noexcept { return inputs.rows; }
};

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices);

struct ForwardResult {
  double loss = 0.0;
  Matrix logits;
};

/// Mean loss over the batch and the final-layer pre-loss outputs.
ForwardResult forward(const Architecture& arch, const ParamVector& theta, const Batch& batch);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> grad;
};

/// d(mean loss)/d(theta) for every parameter.
LossAndGradient backward(const Architecture& arch, const ParamVector& theta, const Batch& batch);

/// theta <- theta - lr * grad.
void sgd_step(ParamVector& theta, std::span<const double> grad, double lr);

/// Gradient information left behind by local training.
struct GradientSnapshot {
  /// Gradient of the final mini-batch at the post-training parameters.
  std::vector<double> exact_grad;
  /// theta_end - theta_start.
  std::vector<double> delta_theta;
};

struct TrainOptions {
  std::size_t epochs = 5;
  double learning_rate = 0.1;
  std::size_t batch_size = 10;
};

struct TrainResult {
  ParamVector theta;
  GradientSnapshot snapshot;
};

/// Mini-batch SGD over `shard`, reshuffled every epoch with a Fisher-Yates
/// permutation drawn from SplitMix64(seed). The final batch of an epoch may
/// be short. With zero epochs the snapshot gradient is taken over the whole
/// shard.
TrainResult local_train(const Architecture& arch, ParamVector start, const Dataset& shard,
                        const TrainOptions& opts, std::uint64_t seed);

/// Fraction of correctly classified samples; 0 for an empty set.
double accuracy(const Architecture& arch, const ParamVector& theta, const Dataset& data);
/// Mean loss over the whole set.
double mean_loss(const Architecture& arch, const ParamVector& theta, const Dataset& data);

}  // namespace fedpurin::nn
