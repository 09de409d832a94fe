#include <doctest.h>

#include <cmath>
#include <numeric>

#include "fedpurin/errors.hpp"
#include "fedpurin/nn.hpp"
#include "fedpurin/rng.hpp"
#include "reference.hpp"

using namespace fedpurin;
using namespace fedpurin::nn;

namespace {

Architecture linear_classifier(std::size_t in, std::size_t classes) {
  return Architecture({LayerSpec::dense(in, classes), LayerSpec::act(Activation::softmax_cross_entropy, classes)});
}

Batch batch_of(std::size_t rows, std::size_t cols, std::vector<double> x, std::vector<std::size_t> labels) {
  Batch b;
  b.inputs = Matrix(rows, cols);
  b.inputs.data = std::move(x);
  b.labels = std::move(labels);
  return b;
}

// 1-feature linear regression harness: l = ½(wx - y)².
struct Regression {
  Architecture arch{std::vector<LayerSpec>{LayerSpec::dense(1, 1)}};
  Batch batch;
  ParamVector theta;

  Regression(double w, double x, double y) {
    batch = batch_of(1, 1, {x}, {0});
    batch.targets = Matrix(1, 1, y);
    theta = arch.zeros();
    theta[0] = w;
  }
};

Dataset random_dataset(rng::SplitMix64& g, std::size_t n, std::size_t dim, std::size_t classes) {
  Dataset ds;
  ds.num_classes = classes;
  ds.features = Matrix(n, dim);
  for (auto& v : ds.features.data) v = g.normal();
  for (std::size_t i = 0; i < n; ++i) ds.labels.push_back(g.below(classes));
  return ds;
}

}  // namespace

TEST_CASE("layout covers every dense layer contiguously") {
  const std::vector<std::size_t> hidden{4, 3};
  const auto arch = Architecture::mlp(5, hidden, 2);
  REQUIRE(arch.layout().size() == 3);
  CHECK(arch.layout()[0] == LayerRange{0, 0, 24});
  CHECK(arch.layout()[1] == LayerRange{2, 24, 15});
  CHECK(arch.layout()[2] == LayerRange{4, 39, 8});
  CHECK(arch.param_count() == 47);
  CHECK(arch.classifier().length == 8);
}

TEST_CASE("architecture rejects inconsistent stacks") {
  CHECK_THROWS_AS(Architecture({LayerSpec::dense(3, 4), LayerSpec::dense(5, 2)}), ConfigError);
  CHECK_THROWS_AS(Architecture({LayerSpec::act(Activation::softmax_cross_entropy, 2), LayerSpec::dense(2, 2)}),
                  ConfigError);
  CHECK_THROWS_AS(Architecture({}), ConfigError);
}

TEST_CASE("initialization is seeded and bounded by 1/sqrt(fan_in)") {
  const std::vector<std::size_t> hidden{8};
  const auto arch = Architecture::mlp(16, hidden, 3);
  const auto a = arch.initialize(5), b = arch.initialize(5), c = arch.initialize(6);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  for (std::size_t j = 0; j < arch.layout()[0].length; ++j) CHECK(std::fabs(a[j]) <= 0.25);
}

TEST_CASE("forward: zero weights give uniform softmax") {
  const auto arch = linear_classifier(2, 2);
  const auto b = batch_of(1, 2, {0.3, -1.7}, {1});
  CHECK(forward(arch, arch.zeros(), b).loss == doctest::Approx(std::log(2.0)));
}

TEST_CASE("forward: confident correct prediction has near-zero loss") {
  const auto arch = linear_classifier(3, 3);
  auto theta = arch.zeros();
  for (std::size_t k = 0; k < 3; ++k) theta[k * 3 + k] = 40.0;
  const auto b = batch_of(1, 3, {0, 1, 0}, {1});
  const auto r = forward(arch, theta, b);
  CHECK(r.loss >= 0.0);
  CHECK(r.loss < 1e-12);
  CHECK(r.logits.rows == 1);
  CHECK(r.logits.cols == 3);
}

TEST_CASE("regression harness: loss and gradient") {
  Regression reg(1.0, 2.0, 0.0);
  CHECK(forward(reg.arch, reg.theta, reg.batch).loss == doctest::Approx(2.0));
  const auto g = backward(reg.arch, reg.theta, reg.batch).grad;
  CHECK(g[0] == doctest::Approx(4.0));
  const auto fd = ref::fd_gradient(reg.arch, reg.theta, reg.batch);
  CHECK(std::fabs(fd[0] - g[0]) < 1e-6);
}

TEST_CASE("backward: zero input gives zero weight gradients") {
  const auto arch = linear_classifier(4, 3);
  rng::SplitMix64 gen(1);
  auto theta = arch.initialize(9);
  const auto b = batch_of(2, 4, std::vector<double>(8, 0.0), {0, 2});
  const auto g = backward(arch, theta, b).grad;
  for (std::size_t j = 0; j < 12; ++j) CHECK(g[j] == 0.0);
}

TEST_CASE("backward: a duplicated sample gives the single-sample gradient") {
  const std::vector<std::size_t> hidden{5};
  const auto arch = Architecture::mlp(3, hidden, 2);
  const auto theta = arch.initialize(2);
  const auto one = batch_of(1, 3, {0.5, -0.2, 1.1}, {1});
  const auto two = batch_of(2, 3, {0.5, -0.2, 1.1, 0.5, -0.2, 1.1}, {1, 1});
  const auto g1 = backward(arch, theta, one).grad;
  const auto g2 = backward(arch, theta, two).grad;
  for (std::size_t j = 0; j < g1.size(); ++j) CHECK(g2[j] == doctest::Approx(g1[j]).epsilon(1e-14));
}

TEST_CASE("backward agrees with central finite differences on random MLPs") {
  rng::SplitMix64 gen(2024);
  for (int trial = 0; trial < 30;) {
    const std::size_t in = 1 + gen.below(4), h1 = 1 + gen.below(6), h2 = 1 + gen.below(6), c = 2 + gen.below(3);
    const std::vector<std::size_t> hidden{h1, h2};
    const auto arch = Architecture::mlp(in, hidden, c);
    REQUIRE(arch.param_count() <= 200);
    const auto theta = arch.initialize(gen.next());
    const auto ds = random_dataset(gen, 1 + gen.below(6), in, c);
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto b = make_batch(ds, all);
    if (ref::min_relu_margin(arch, theta, b) < 1e-3) continue;  // straddles a kink
    ++trial;
    const auto g = backward(arch, theta, b).grad;
    const auto fd = ref::fd_gradient(arch, theta, b);
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double scale = std::max({std::fabs(g[j]), std::fabs(fd[j]), 1e-6});
      CHECK_MESSAGE(std::fabs(g[j] - fd[j]) / scale < 1e-4, "j=" << j << " g=" << g[j] << " fd=" << fd[j]);
    }
  }
}

TEST_CASE("forward validates dimensions and finiteness") {
  const auto arch = linear_classifier(2, 2);
  CHECK_THROWS_AS(forward(arch, arch.zeros(), batch_of(1, 3, {1, 2, 3}, {0})), ConfigError);
  CHECK_THROWS_AS(forward(arch, arch.zeros(), batch_of(1, 2, {1, 2}, {2})), ConfigError);
  auto theta = arch.zeros();
  theta[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(forward(arch, theta, batch_of(1, 2, {1, 0}, {0})), NumericError);
  CHECK_THROWS_AS(forward(arch, arch.zeros(), batch_of(0, 2, {}, {})), ConfigError);
}

TEST_CASE("sgd_step") {
  ParamVector theta({1.0, 2.0}, {{0, 0, 2}});
  SUBCASE("zero gradient leaves the model unchanged") {
    const std::vector<double> zero{0.0, 0.0};
    sgd_step(theta, zero, 0.1);
    CHECK(theta.values == std::vector<double>{1.0, 2.0});
  }
  SUBCASE("hand arithmetic") {
    const std::vector<double> g{1.0, -1.0};
    sgd_step(theta, g, 0.1);
    CHECK(theta[0] == doctest::Approx(0.9));
    CHECK(theta[1] == doctest::Approx(2.1));
  }
  SUBCASE("two steps equal one step with doubled rate") {
    const std::vector<double> g{0.3, -0.7};
    ParamVector other = theta;
    sgd_step(theta, g, 0.05);
    sgd_step(theta, g, 0.05);
    sgd_step(other, g, 0.1);
    CHECK(theta[0] == doctest::Approx(other[0]).epsilon(1e-14));
    CHECK(theta[1] == doctest::Approx(other[1]).epsilon(1e-14));
  }
  SUBCASE("length mismatch") {
    const std::vector<double> g{1.0};
    CHECK_THROWS_AS(sgd_step(theta, g, 0.1), ConfigError);
  }
}

TEST_CASE("a small SGD step does not increase the batch loss") {
  rng::SplitMix64 gen(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<std::size_t> hidden{6, 4};
    const auto arch = Architecture::mlp(3, hidden, 3);
    auto theta = arch.initialize(gen.next());
    const auto ds = random_dataset(gen, 8, 3, 3);
    std::vector<std::size_t> all(8);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto b = make_batch(ds, all);
    const auto lg = backward(arch, theta, b);
    sgd_step(theta, lg.grad, 1e-3);
    CHECK(forward(arch, theta, b).loss <= lg.loss);
  }
}

TEST_CASE("local_train") {
  rng::SplitMix64 gen(5);
  const std::vector<std::size_t> hidden{6};
  const auto arch = Architecture::mlp(4, hidden, 3);
  const auto ds = random_dataset(gen, 23, 4, 3);
  const auto start = arch.initialize(1);

  SUBCASE("zero epochs leave the model unchanged") {
    const auto r = local_train(arch, start, ds, {0, 0.1, 5}, 3);
    CHECK(r.theta == start);
    for (double v : r.snapshot.delta_theta) CHECK(v == 0.0);
  }
  SUBCASE("zero learning rate: exact_grad is the gradient at the start") {
    const auto r = local_train(arch, start, ds, {2, 0.0, 100}, 3);
    for (double v : r.snapshot.delta_theta) CHECK(v == 0.0);
    std::vector<std::size_t> all(ds.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto g = backward(arch, start, make_batch(ds, all)).grad;
    for (std::size_t j = 0; j < g.size(); ++j) CHECK(r.snapshot.exact_grad[j] == doctest::Approx(g[j]).epsilon(1e-12));
  }
  SUBCASE("deterministic for a fixed seed") {
    const auto a = local_train(arch, start, ds, {3, 0.1, 5}, 11);
    const auto b = local_train(arch, start, ds, {3, 0.1, 5}, 11);
    const auto c = local_train(arch, start, ds, {3, 0.1, 5}, 12);
    CHECK(ref::same_bits(a.theta.values, b.theta.values));
    CHECK(ref::same_bits(a.snapshot.exact_grad, b.snapshot.exact_grad));
    CHECK_FALSE(ref::same_bits(a.theta.values, c.theta.values));
  }
  SUBCASE("delta_theta is end minus start") {
    const auto r = local_train(arch, start, ds, {2, 0.1, 4}, 2);
    for (std::size_t j = 0; j < start.size(); ++j) CHECK(r.snapshot.delta_theta[j] == r.theta[j] - start[j]);
  }
  SUBCASE("empty shard") {
    Dataset empty;
    empty.features = Matrix(0, 4);
    empty.num_classes = 3;
    CHECK_THROWS_AS(local_train(arch, start, empty, {1, 0.1, 5}, 1), ConfigError);
  }
}

TEST_CASE("training on a separable problem raises accuracy") {
  rng::SplitMix64 gen(8);
  Dataset ds;
  ds.num_classes = 2;
  ds.features = Matrix(40, 2);
  for (std::size_t i = 0; i < 40; ++i) {
    const std::size_t y = i % 2;
    ds.features(i, 0) = (y ? 2.0 : -2.0) + 0.3 * gen.normal();
    ds.features(i, 1) = 0.3 * gen.normal();
    ds.labels.push_back(y);
  }
  const std::vector<std::size_t> hidden{4};
  const auto arch = Architecture::mlp(2, hidden, 2);
  const auto r = local_train(arch, arch.initialize(3), ds, {20, 0.1, 8}, 4);
  CHECK(accuracy(arch, r.theta, ds) > 0.95);
}
