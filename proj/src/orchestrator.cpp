#include "fedpurin/orchestrator.hpp"

#include <algorithm>
#include <exception>
#include <numeric>
#include <string>

#include "fedpurin/errors.hpp"
#include "fedpurin/rng.hpp"

namespace fedpurin::sim {

Transfer account_uplink(const server::ClientUpdate& update, Method method, std::size_t classifier_size) {
  const std::uint64_t d = update.sparse_params.size();
  const std::uint64_t mask_bytes = (d + 7) / 8;
  switch (method) {
    case Method::fedpurin: {
      const std::uint64_t nnz = update.mask.popcount();
      return {4 * nnz + mask_bytes, nnz};
    }
    case Method::fedcac: return {4 * d + mask_bytes, d};
    case Method::fedavg: return {4 * d, d};
    case Method::fedper: return {4 * (d - classifier_size), d - classifier_size};
    case Method::separate: return {0, 0};
  }
  return {};
}

Transfer account_downlink(const ParamVector& combined, Method method, std::size_t round, std::size_t beta,
                          const Mask& mask, std::size_t classifier_size) {
  const std::uint64_t d = combined.size();
  switch (method) {
    case Method::fedpurin: {
      const std::uint64_t nnz = combined.nonzeros();
      return {4 * nnz, nnz};
    }
    case Method::fedcac: {
      const std::uint64_t nnz = round > beta ? d - mask.popcount() : d;
      return {4 * nnz, nnz};
    }
    case Method::fedavg: return {4 * d, d};
    case Method::fedper: return {4 * (d - classifier_size), d - classifier_size};
    case Method::separate: return {0, 0};
  }
  return {};
}

std::uint64_t CommLedger::total_uplink_bytes() const {
  std::uint64_t s = 0;
  for (const auto& e : entries) s += e.uplink.bytes;
  return s;
}

std::uint64_t CommLedger::total_downlink_bytes() const {
  std::uint64_t s = 0;
  for (const auto& e : entries) s += e.downlink.bytes;
  return s;
}

Dataset load_dataset(const RunConfig& cfg) {
  switch (cfg.data.source) {
    case DataSource::synthetic:
      return data::generate_synthetic(cfg.data.num_classes, cfg.data.feature_dim, cfg.data.samples_per_class,
                                      cfg.data.separation, cfg.data.seed);
    case DataSource::idx: return data::load_idx(cfg.data.images, cfg.data.labels);
    case DataSource::csv: return data::load_csv(cfg.data.csv);
  }
  throw ConfigError("data.source: unsupported");
}

namespace {

constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kPartitionStream = 0x70617274;

// Runs body(i) for every client in parallel and rethrows the first failure
// (lowest client id) with round/client context.
template <typename Body>
void for_each_client(std::size_t n, std::size_t round, Body body) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    const std::string where = "round " + std::to_string(round) + ", client " + std::to_string(i) + ": ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    } catch (const NumericError& e) {
      throw NumericError(where + e.what());
    } catch (const ProtocolError& e) {
      throw ProtocolError(where + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error(where + e.what());
    }
  }
}

std::vector<std::size_t> all_clients(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  return ids;
}

}  // namespace

RunResult run(const RunConfig& cfg, const Dataset& ds, const RunHooks& hooks) {
  cfg.validate();
  const std::size_t n = cfg.num_clients;

  data::PartitionSpec pspec = cfg.partition;
  pspec.num_clients = n;
  pspec.seed = rng::derive_seed(cfg.seed, kPartitionStream);
  const data::Partition part = data::dirichlet_partition(ds, pspec);

  const nn::Architecture arch = nn::Architecture::mlp(ds.feature_dim(), cfg.hidden, ds.num_classes);
  const std::size_t d = arch.param_count();
  const LayerRange head = arch.classifier();
  const nn::TrainOptions opts{cfg.local_epochs, cfg.lr, cfg.batch_size};

  saliency::ScoreConfig score_cfg = cfg.score;
  if (cfg.method == Method::fedcac) score_cfg.include_hessian_term = false;  // |g·θ| sensitivity

  const bool masked = cfg.method == Method::fedpurin || cfg.method == Method::fedcac;

  RunResult res;
  res.param_count = d;
  res.classifier_size = head.length;
  res.exhaustion = part.exhaustion;
  if (masked) {
    res.selection_counts.assign(n, std::vector<std::uint32_t>(d, 0));
    res.global_nonzero_counts.assign(d, 0);
  }

  std::vector<ParamVector> models(n, arch.initialize(rng::derive_seed(cfg.seed, kInitStream)));
  std::vector<ParamVector> trained(n);
  std::vector<nn::GradientSnapshot> snapshots(n);
  std::vector<Mask> masks(n);
  std::vector<std::size_t> removals(n, 0);
  const Mask full(d, true);
  const auto everyone = all_clients(n);

  double best = -1.0;
  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    MetricsRow row;
    row.round = round;
    row.client_accuracy.assign(n, 0.0);
    row.client_train_loss.assign(n, 0.0);

    for_each_client(n, round, [&](std::size_t i) {
      auto tr = nn::local_train(arch, models[i], part.clients[i].train, opts, rng::derive_seed(cfg.seed, i, round));
      row.client_accuracy[i] = nn::accuracy(arch, tr.theta, part.clients[i].test);
      row.client_train_loss[i] = nn::mean_loss(arch, tr.theta, part.clients[i].train);
      if (masked) {
        auto scores = saliency::score(tr.theta, tr.snapshot, score_cfg);
        if (hooks.on_scores) hooks.on_scores(round, i, scores);
        masks[i] = saliency::build_mask(scores, score_cfg, arch.layout());
        removals[i] = saliency::cutoff_removals(scores, score_cfg, arch.layout());
      }
      trained[i] = std::move(tr.theta);
      snapshots[i] = std::move(tr.snapshot);
    });

    for (std::size_t i = 0; i < n; ++i) {
      row.mean_accuracy += row.client_accuracy[i];
      row.mean_train_loss += row.client_train_loss[i];
    }
    row.mean_accuracy /= static_cast<double>(n);
    row.mean_train_loss /= static_cast<double>(n);
    if (row.mean_accuracy > best) {
      best = row.mean_accuracy;
      res.best_round = round;
    }
    row.best_mean_accuracy = best;
    res.metrics.push_back(std::move(row));

    std::vector<LedgerEntry> entries(n);
    for (std::size_t i = 0; i < n; ++i) entries[i] = {round, i, {}, {}};

    switch (cfg.method) {
      case Method::separate: {
        for (std::size_t i = 0; i < n; ++i) models[i] = trained[i];
        break;
      }
      case Method::fedavg:
      case Method::fedper: {
        const ParamVector global = server::group_mean(trained, everyone);
        for (std::size_t i = 0; i < n; ++i) {
          models[i] = global;
          if (cfg.method == Method::fedper) {
            std::copy(trained[i].values.begin() + static_cast<std::ptrdiff_t>(head.offset),
                      trained[i].values.begin() + static_cast<std::ptrdiff_t>(head.end()),
                      models[i].values.begin() + static_cast<std::ptrdiff_t>(head.offset));
          }
          const server::ClientUpdate up{i, trained[i], full};
          entries[i].uplink = account_uplink(up, cfg.method, head.length);
          entries[i].downlink = account_downlink(models[i], cfg.method, round, cfg.beta, full, head.length);
        }
        break;
      }
      case Method::fedpurin:
      case Method::fedcac: {
        const server::OverlapMatrix o = server::overlap_matrix(masks);
        const server::CollabPlan plan = hooks.threshold_override
                                            ? server::plan_collaboration(o, *hooks.threshold_override)
                                            : server::plan_for_round(round, o, cfg.beta);
        std::vector<server::ClientUpdate> updates;
        updates.reserve(n);
        for (std::size_t i = 0; i < n; ++i) updates.push_back(server::make_update(i, trained[i], masks[i]));

        const ParamVector global = cfg.method == Method::fedpurin ? server::global_model(updates)
                                                                  : server::group_mean(trained, everyone);
        for (std::size_t i = 0; i < n; ++i) {
          ParamVector delta;
          if (cfg.method == Method::fedpurin) {
            delta = server::grouped_model(updates, plan, i);
          } else {
            std::vector<std::size_t> members = plan.sets[i];
            members.push_back(i);
            std::sort(members.begin(), members.end());
            delta = server::group_mean(trained, members);
          }
          models[i] = server::combine(delta, global, masks[i]);
          entries[i].uplink = account_uplink(updates[i], cfg.method);
          entries[i].downlink = account_downlink(models[i], cfg.method, round, cfg.beta, masks[i]);
          res.cutoff_removals += removals[i];
          for (std::size_t j = 0; j < d; ++j) res.selection_counts[i][j] += masks[i].test(j) ? 1 : 0;
        }
        for (std::size_t j = 0; j < d; ++j) res.global_nonzero_counts[j] += global.values[j] != 0.0 ? 1 : 0;
        break;
      }
    }
    res.ledger.entries.insert(res.ledger.entries.end(), entries.begin(), entries.end());
  }

  res.best_mean_accuracy = best;
  res.final_models = std::move(models);
  return res;
}

RunResult run(const RunConfig& cfg, const RunHooks& hooks) {
  cfg.validate();
  return run(cfg, load_dataset(cfg), hooks);
}

}  // namespace fedpurin::sim
