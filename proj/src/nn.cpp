#include "fedpurin/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedpurin/errors.hpp"
#include "fedpurin/rng.hpp"

namespace fedpurin {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_classes = num_classes;
  out.features = Matrix(indices.size(), features.cols);
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto src = features.row(indices[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

void Dataset::validate() const {
  if (features.rows != labels.size()) {
    throw ConfigError("dataset has " + std::to_string(features.rows) + " feature rows but " +
                      std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw ConfigError("label " + std::to_string(labels[i]) + " at sample " + std::to_string(i) +
                        " is not below num_classes=" + std::to_string(num_classes));
    }
  }
}

}  // namespace fedpurin

namespace fedpurin::nn {

Architecture::Architecture(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("architecture has no layers");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.input_dim == 0 || l.output_dim == 0) {
      throw ConfigError("layer " + std::to_string(k) + " has a zero dimension");
    }
    if (k > 0 && layers_[k - 1].output_dim != l.input_dim) {
      throw ConfigError("layer " + std::to_string(k) + " expects input " + std::to_string(l.input_dim) +
                        " but previous layer outputs " + std::to_string(layers_[k - 1].output_dim));
    }
    if (l.kind == LayerKind::activation) {
      if (l.input_dim != l.output_dim) {
        throw ConfigError("activation layer " + std::to_string(k) + " must preserve its dimension");
      }
      if (l.activation == Activation::softmax_cross_entropy && k + 1 != layers_.size()) {
        throw ConfigError("softmax-cross-entropy must be the final layer");
      }
    } else {
      const std::size_t len = l.output_dim * l.input_dim + l.output_dim;
      layout_.push_back({k, param_count_, len});
      param_count_ += len;
    }
  }
  if (layout_.empty()) throw ConfigError("architecture has no dense layer");
}

Architecture Architecture::mlp(std::size_t input_dim, std::span<const std::size_t> hidden,
                               std::size_t num_classes) {
  std::vector<LayerSpec> layers;
  std::size_t prev = input_dim;
  for (auto width : hidden) {
    layers.push_back(LayerSpec::dense(prev, width));
    layers.push_back(LayerSpec::act(Activation::relu, width));
    prev = width;
  }
  layers.push_back(LayerSpec::dense(prev, num_classes));
  layers.push_back(LayerSpec::act(Activation::softmax_cross_entropy, num_classes));
  return Architecture(std::move(layers));
}

ParamVector Architecture::initialize(std::uint64_t seed) const {
  rng::SplitMix64 gen(seed);
  std::vector<double> values(param_count_);
  for (const auto& r : layout_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layers_[r.layer_id].input_dim));
    for (std::size_t j = r.offset; j < r.end(); ++j) values[j] = gen.uniform(-bound, bound);
  }
  return ParamVector(std::move(values), layout_);
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> indices) {
  Batch b;
  Dataset sub = data.subset(indices);
  b.inputs = std::move(sub.features);
  b.labels = std::move(sub.labels);
  return b;
}

namespace {

void check_finite(const Matrix& m, std::size_t layer) {
  for (double x : m.data) {
    if (!std::isfinite(x)) {
      throw NumericError("non-finite activation in layer " + std::to_string(layer));
    }
  }
}

struct Trace {
  // activations[k] is the input of layer k; activations.back() is the output.
  std::vector<Matrix> activations;
  double loss = 0.0;
};

Trace run_forward(const Architecture& arch, const ParamVector& theta, const Batch& batch) {
  if (theta.size() != arch.param_count()) {
    throw ConfigError("parameter vector has " + std::to_string(theta.size()) + " entries, model needs " +
                      std::to_string(arch.param_count()));
  }
  const std::size_t n = batch.size();
  if (n == 0) throw ConfigError("empty batch");
  if (batch.inputs.cols != arch.input_dim()) {
    throw ConfigError("batch has " + std::to_string(batch.inputs.cols) + " features, model expects " +
                      std::to_string(arch.input_dim()));
  }

  Trace t;
  t.activations.reserve(arch.layers().size() + 1);
  t.activations.push_back(batch.inputs);
  std::size_t dense_idx = 0;
  for (std::size_t k = 0; k < arch.layers().size(); ++k) {
    const auto& spec = arch.layers()[k];
    const Matrix& in = t.activations.back();
    Matrix out(n, spec.output_dim);
    if (spec.kind == LayerKind::dense) {
      const auto& r = arch.layout()[dense_idx++];
      const double* w = theta.values.data() + r.offset;
      const double* bias = w + spec.output_dim * spec.input_dim;
      for (std::size_t b = 0; b < n; ++b) {
        const auto x = in.row(b);
        for (std::size_t o = 0; o < spec.output_dim; ++o) {
          const double* wrow = w + o * spec.input_dim;
          double acc = bias[o];
          for (std::size_t i = 0; i < spec.input_dim; ++i) acc += wrow[i] * x[i];
          out(b, o) = acc;
        }
      }
    } else if (spec.activation == Activation::relu) {
      for (std::size_t q = 0; q < in.data.size(); ++q) out.data[q] = in.data[q] > 0.0 ? in.data[q] : 0.0;
    } else {
      out = in;  // identity; softmax is folded into the loss
    }
    check_finite(out, k);
    t.activations.push_back(std::move(out));
  }

  const Matrix& y = t.activations.back();
  double total = 0.0;
  if (arch.classification()) {
    if (batch.labels.size() != n) throw ConfigError("batch label count does not match inputs");
    for (std::size_t b = 0; b < n; ++b) {
      if (batch.labels[b] >= y.cols) {
        throw ConfigError("label " + std::to_string(batch.labels[b]) + " out of range for " +
                          std::to_string(y.cols) + " classes");
      }
      const auto row = y.row(b);
      const double mx = *std::max_element(row.begin(), row.end());
      double s = 0.0;
      for (double v : row) s += std::exp(v - mx);
      total += (mx + std::log(s)) - row[batch.labels[b]];
    }
  } else {
    if (batch.targets.rows != n || batch.targets.cols != y.cols) {
      throw ConfigError("squared-error model needs a targets matrix shaped like the output");
    }
    for (std::size_t q = 0; q < y.data.size(); ++q) {
      const double e = y.data[q] - batch.targets.data[q];
      total += 0.5 * e * e;
    }
  }
  t.loss = total / static_cast<double>(n);
  if (!std::isfinite(t.loss)) throw NumericError("non-finite loss");
  return t;
}

}  // namespace

ForwardResult forward(const Architecture& arch, const ParamVector& theta, const Batch& batch) {
  Trace t = run_forward(arch, theta, batch);
  return {t.loss, std::move(t.activations.back())};
}

LossAndGradient backward(const Architecture& arch, const ParamVector& theta, const Batch& batch) {
  Trace t = run_forward(arch, theta, batch);
  const std::size_t n = batch.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Gradient of the mean loss w.r.t. the final layer output.
  Matrix delta = t.activations.back();
  if (arch.classification()) {
    for (std::size_t b = 0; b < n; ++b) {
      auto row = delta.row(b);
      const double mx = *std::max_element(row.begin(), row.end());
      double s = 0.0;
      for (double& v : row) {
        v = std::exp(v - mx);
        s += v;
      }
      for (double& v : row) v = v / s * inv_n;
      row[batch.labels[b]] -= inv_n;
    }
  } else {
    for (std::size_t q = 0; q < delta.data.size(); ++q) {
      delta.data[q] = (delta.data[q] - batch.targets.data[q]) * inv_n;
    }
  }

  LossAndGradient out{t.loss, std::vector<double>(theta.size(), 0.0)};
  std::size_t dense_idx = arch.layout().size();
  for (std::size_t k = arch.layers().size(); k-- > 0;) {
    const auto& spec = arch.layers()[k];
    const Matrix& in = t.activations[k];
    if (spec.kind == LayerKind::dense) {
      const auto& r = arch.layout()[--dense_idx];
      const double* w = theta.values.data() + r.offset;
      double* gw = out.grad.data() + r.offset;
      double* gb = gw + spec.output_dim * spec.input_dim;
      Matrix din(n, spec.input_dim);
      for (std::size_t b = 0; b < n; ++b) {
        const auto x = in.row(b);
        auto dx = din.row(b);
        for (std::size_t o = 0; o < spec.output_dim; ++o) {
          const double d = delta(b, o);
          if (d == 0.0) continue;
          double* gwrow = gw + o * spec.input_dim;
          const double* wrow = w + o * spec.input_dim;
          for (std::size_t i = 0; i < spec.input_dim; ++i) {
            gwrow[i] += d * x[i];
            dx[i] += d * wrow[i];
          }
          gb[o] += d;
        }
      }
      delta = std::move(din);
    } else if (spec.activation == Activation::relu) {
      for (std::size_t q = 0; q < delta.data.size(); ++q) {
        if (!(in.data[q] > 0.0)) delta.data[q] = 0.0;
      }
    }
  }
  return out;
}

void sgd_step(ParamVector& theta, std::span<const double> grad, double lr) {
  if (grad.size() != theta.size()) {
    throw ConfigError("gradient length " + std::to_string(grad.size()) + " does not match " +
                      std::to_string(theta.size()) + " parameters");
  }
  for (std::size_t j = 0; j < grad.size(); ++j) theta.values[j] -= lr * grad[j];
}

TrainResult local_train(const Architecture& arch, ParamVector start, const Dataset& shard,
                        const TrainOptions& opts, std::uint64_t seed) {
  if (shard.size() == 0) throw ConfigError("local training on an empty shard");
  if (opts.batch_size == 0) throw ConfigError("batch_size must be positive");

  TrainResult res{start, {}};
  rng::SplitMix64 gen(seed);
  std::vector<std::size_t> order(shard.size());
  std::vector<std::size_t> last_batch;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[gen.below(i + 1)]);
    for (std::size_t begin = 0; begin < order.size(); begin += opts.batch_size) {
      const std::size_t end = std::min(order.size(), begin + opts.batch_size);
      last_batch.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                        order.begin() + static_cast<std::ptrdiff_t>(end));
      const Batch batch = make_batch(shard, last_batch);
      const auto lg = backward(arch, res.theta, batch);
      sgd_step(res.theta, lg.grad, opts.learning_rate);
    }
  }

  if (last_batch.empty()) {
    last_batch.resize(shard.size());
    std::iota(last_batch.begin(), last_batch.end(), std::size_t{0});
  }
  res.snapshot.exact_grad = backward(arch, res.theta, make_batch(shard, last_batch)).grad;
  res.snapshot.delta_theta.resize(res.theta.size());
  for (std::size_t j = 0; j < res.theta.size(); ++j) {
    res.snapshot.delta_theta[j] = res.theta.values[j] - start.values[j];
  }
  for (double g : res.snapshot.exact_grad) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient after local training");
  }
  return res;
}

double accuracy(const Architecture& arch, const ParamVector& theta, const Dataset& data) {
  if (data.size() == 0) return 0.0;
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const auto fr = forward(arch, theta, make_batch(data, all));
  std::size_t correct = 0;
  for (std::size_t b = 0; b < data.size(); ++b) {
    const auto row = fr.logits.row(b);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += pred == data.labels[b] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double mean_loss(const Architecture& arch, const ParamVector& theta, const Dataset& data) {
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return forward(arch, theta, make_batch(data, all)).loss;
}

}  // namespace fedpurin::nn
