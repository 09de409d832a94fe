#include <doctest.h>

#include <omp.h>

#include <cmath>

#include "fedpurin/errors.hpp"
#include "fedpurin/orchestrator.hpp"
#include "fedpurin/rng.hpp"
#include "reference.hpp"

using namespace fedpurin;
using namespace fedpurin::sim;

namespace {

RunConfig small(Method m) {
  RunConfig c;
  c.method = m;
  c.num_clients = 3;
  c.rounds = 3;
  c.local_epochs = 1;
  c.batch_size = 5;
  c.beta = 2;
  c.hidden = {8};
  c.partition.alpha = 0.5;
  c.partition.train_per_client = 20;
  c.partition.test_per_client = 10;
  c.data.num_classes = 4;
  c.data.feature_dim = 6;
  c.data.samples_per_class = 60;
  c.data.separation = 1.5;
  c.seed = 7;
  return c;
}

server::ClientUpdate upd(std::vector<double> v, std::vector<int> bits) {
  const std::size_t n = v.size();
  return server::make_update(0, ParamVector(std::move(v), {{0, 0, n}}), Mask::from_bits(bits));
}

bool same_models(const RunResult& a, const RunResult& b) {
  if (a.final_models.size() != b.final_models.size()) return false;
  for (std::size_t i = 0; i < a.final_models.size(); ++i) {
    if (!ref::same_bits(a.final_models[i].values, b.final_models[i].values)) return false;
  }
  return true;
}

bool same_metrics(const RunResult& a, const RunResult& b) {
  if (a.metrics.size() != b.metrics.size()) return false;
  for (std::size_t r = 0; r < a.metrics.size(); ++r) {
    if (a.metrics[r].client_accuracy != b.metrics[r].client_accuracy) return false;
    if (!ref::same_bits(a.metrics[r].client_train_loss, b.metrics[r].client_train_loss)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("uplink accounting") {
  const auto u = upd({1, 0, 2, 0, 3, 0, 4, 0}, {1, 0, 1, 0, 1, 0, 1, 0});
  CHECK(account_uplink(u, Method::fedpurin).bytes == 17);
  CHECK(account_uplink(u, Method::fedpurin).nnz == 4);
  CHECK(account_uplink(u, Method::fedavg).bytes == 32);
  CHECK(account_uplink(u, Method::fedcac).bytes == 33);
  CHECK(account_uplink(u, Method::fedper, 3).bytes == 20);
  CHECK(account_uplink(u, Method::separate).bytes == 0);
}

TEST_CASE("downlink accounting") {
  const ParamVector dense({1, 2, 3, 4}, {{0, 0, 4}});
  const ParamVector sparse({1, 0, 0, 4}, {{0, 0, 4}});
  const Mask none(4);
  CHECK(account_downlink(dense, Method::fedpurin, 1, 10, none).bytes == 16);
  CHECK(account_downlink(sparse, Method::fedpurin, 1, 10, none).bytes == 8);

  const ParamVector eight(std::vector<double>(8, 1.0), {{0, 0, 8}});
  const auto half = Mask::from_bits(std::vector<int>{1, 1, 1, 1, 0, 0, 0, 0});
  CHECK(account_downlink(eight, Method::fedcac, 10, 10, half).bytes == 32);
  CHECK(account_downlink(eight, Method::fedcac, 11, 10, half).bytes == 16);
  CHECK(account_downlink(eight, Method::fedavg, 11, 10, half).bytes == 32);
  CHECK(account_downlink(eight, Method::fedper, 1, 10, half, 2).bytes == 24);
  CHECK(account_downlink(eight, Method::separate, 1, 10, half).bytes == 0);
}

TEST_CASE("fedavg hand mean") {
  const std::vector<ParamVector> models{ParamVector({0.0, 2.0}, {{0, 0, 2}}), ParamVector({4.0, 6.0}, {{0, 0, 2}})};
  CHECK(server::group_mean(models, std::vector<std::size_t>{0, 1}).values == std::vector<double>{2.0, 4.0});
}

TEST_CASE("separate never communicates") {
  const auto res = run(small(Method::separate));
  CHECK(res.ledger.entries.size() == 9);
  for (const auto& e : res.ledger.entries) {
    CHECK(e.uplink.bytes == 0);
    CHECK(e.downlink.bytes == 0);
    CHECK(e.uplink.nnz == 0);
  }
  // Clients start from the same init but drift apart with no mixing.
  CHECK(res.final_models[0].values != res.final_models[1].values);
}

TEST_CASE("zero local epochs leave the shared initialization in place") {
  auto cfg = small(Method::fedavg);
  cfg.rounds = 1;
  cfg.local_epochs = 0;
  cfg.num_clients = 2;
  const auto ds = load_dataset(cfg);
  const auto res = run(cfg, ds);
  const auto arch = nn::Architecture::mlp(ds.feature_dim(), cfg.hidden, ds.num_classes);
  const auto init = arch.initialize(rng::derive_seed(cfg.seed, 0x696e6974));
  for (const auto& m : res.final_models) CHECK(ref::same_bits(m.values, init.values));

  cfg.num_clients = 3;
  const auto three = run(cfg, ds);
  for (const auto& m : three.final_models) {
    for (std::size_t j = 0; j < m.size(); ++j) CHECK(m[j] == doctest::Approx(init[j]).epsilon(1e-15));
  }
}

TEST_CASE("fedavg models are identical across clients") {
  const auto res = run(small(Method::fedavg));
  for (const auto& m : res.final_models) CHECK(ref::same_bits(m.values, res.final_models[0].values));
  for (const auto& e : res.ledger.entries) {
    CHECK(e.uplink.bytes == 4 * res.param_count);
    CHECK(e.downlink.bytes == 4 * res.param_count);
  }
}

TEST_CASE("fedper keeps the classifier local") {
  const auto res = run(small(Method::fedper));
  const auto cfg = small(Method::fedper);
  const std::size_t head = res.classifier_size;
  CHECK(head == (8 + 1) * cfg.data.num_classes);
  const std::size_t body = res.param_count - head;
  for (std::size_t i = 1; i < res.final_models.size(); ++i) {
    const auto& a = res.final_models[0].values;
    const auto& b = res.final_models[i].values;
    CHECK(std::equal(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(body), b.begin()));
    CHECK_FALSE(std::equal(a.begin() + static_cast<std::ptrdiff_t>(body), a.end(),
                           b.begin() + static_cast<std::ptrdiff_t>(body)));
  }
  for (const auto& e : res.ledger.entries) CHECK(e.uplink.bytes == 4 * body);
}

TEST_CASE("fedpurin degenerates to fedavg with full masks and everyone collaborating") {
  auto cfg = small(Method::fedpurin);
  cfg.score.tau = 1.0;
  cfg.score.cutoff = 0.0;
  cfg.rounds = 4;
  RunHooks hooks;
  hooks.threshold_override = 0.0;
  const auto ds = load_dataset(cfg);
  const auto purin = run(cfg, ds, hooks);
  cfg.method = Method::fedavg;
  const auto avg = run(cfg, ds);
  CHECK(same_models(purin, avg));
  CHECK(same_metrics(purin, avg));

  cfg.method = Method::fedcac;
  const auto cac = run(cfg, ds, hooks);
  CHECK(same_models(cac, avg));
}

TEST_CASE("fedpurin uplink matches the per-layer selection count") {
  auto cfg = small(Method::fedpurin);
  cfg.score.cutoff = 0.0;
  const auto ds = load_dataset(cfg);
  const auto res = run(cfg, ds);
  const auto arch = nn::Architecture::mlp(ds.feature_dim(), cfg.hidden, ds.num_classes);
  std::uint64_t k = 0;
  for (const auto& l : arch.layout()) k += static_cast<std::uint64_t>(std::ceil(0.5 * static_cast<double>(l.length)));
  const std::uint64_t d = res.param_count;
  CHECK(res.cutoff_removals == 0);
  for (const auto& e : res.ledger.entries) {
    CHECK(e.uplink.bytes == 4 * k + (d + 7) / 8);
    CHECK(e.downlink.bytes <= 4 * d);
  }
}

TEST_CASE("fedcac downlink shrinks after beta") {
  auto cfg = small(Method::fedcac);
  cfg.score.cutoff = 0.0;
  cfg.rounds = 4;
  cfg.beta = 2;
  const auto res = run(cfg);
  const std::uint64_t d = res.param_count;
  for (const auto& e : res.ledger.entries) {
    CHECK(e.uplink.bytes == 4 * d + (d + 7) / 8);
    if (e.round <= cfg.beta) {
      CHECK(e.downlink.nnz == d);
    } else {
      CHECK(e.downlink.nnz < d);
      CHECK(e.downlink.nnz * 2 <= d);
    }
  }
}

TEST_CASE("after beta each client keeps its own critical values") {
  // No collaborators: critical positions must hold the client's own trained
  // values, which are what separate keeps after round 1 on the same seed.
  auto cfg = small(Method::fedpurin);
  cfg.rounds = 1;
  RunHooks never;
  never.threshold_override = 2.0;
  const auto ds = load_dataset(cfg);
  const auto purin = run(cfg, ds, never);
  cfg.method = Method::separate;
  const auto sep = run(cfg, ds);
  for (std::size_t i = 0; i < cfg.num_clients; ++i) {
    std::size_t agree = 0, critical = 0;
    for (std::size_t j = 0; j < purin.param_count; ++j) {
      if (purin.selection_counts[i][j] == 0) continue;
      ++critical;
      agree += purin.final_models[i][j] == sep.final_models[i][j];
    }
    CHECK(critical > 0);
    CHECK(agree == critical);
  }
}

TEST_CASE("best accuracy is a running maximum") {
  auto cfg = small(Method::fedpurin);
  cfg.rounds = 6;
  const auto res = run(cfg);
  double best = 0.0;
  for (const auto& row : res.metrics) {
    double mean = 0.0;
    for (double a : row.client_accuracy) {
      CHECK((a >= 0.0 && a <= 1.0));
      mean += a;
    }
    CHECK(row.mean_accuracy == doctest::Approx(mean / 3.0));
    CHECK(row.best_mean_accuracy >= best);
    best = std::max(best, row.mean_accuracy);
    CHECK(row.best_mean_accuracy == best);
  }
  CHECK(res.best_mean_accuracy == best);
  CHECK(res.metrics[res.best_round - 1].mean_accuracy == best);
}

TEST_CASE("runs are deterministic and independent of the thread count") {
  for (auto m : {Method::fedpurin, Method::fedcac, Method::fedper}) {
    const auto cfg = small(m);
    const auto ds = load_dataset(cfg);
    omp_set_num_threads(1);
    const auto a = run(cfg, ds);
    omp_set_num_threads(3);
    const auto b = run(cfg, ds);
    CHECK(same_models(a, b));
    CHECK(same_metrics(a, b));
    REQUIRE(a.ledger.entries.size() == b.ledger.entries.size());
    for (std::size_t k = 0; k < a.ledger.entries.size(); ++k) {
      CHECK(a.ledger.entries[k].uplink.bytes == b.ledger.entries[k].uplink.bytes);
      CHECK(a.ledger.entries[k].downlink.bytes == b.ledger.entries[k].downlink.bytes);
    }
    auto other = cfg;
    other.seed = cfg.seed + 1;
    CHECK_FALSE(same_models(a, run(other, ds)));
  }
}

TEST_CASE("errors carry round and client context") {
  auto cfg = small(Method::fedpurin);
  RunHooks hooks;
  hooks.on_scores = [](std::size_t round, std::size_t client, saliency::SaliencyScores&) {
    if (round == 2 && client == 1) throw NumericError("boom");
  };
  try {
    run(cfg, hooks);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("round 2, client 1") != std::string::npos);
  }
  cfg.rounds = 0;
  CHECK_THROWS_AS(run(cfg), ConfigError);
}
