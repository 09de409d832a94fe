#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fedpurin/config.hpp"
#include "fedpurin/data.hpp"
#include "fedpurin/nn.hpp"
#include "fedpurin/saliency.hpp"
#include "fedpurin/server.hpp"

namespace fedpurin::sim {

/// Bytes and transmitted values for one message.
struct Transfer {
  std::uint64_t bytes = 0;
  std::uint64_t nnz = 0;
};

/// Values are 4 bytes each, masks 1 bit per element. `classifier_size` is
/// only read for fedper.
Transfer account_uplink(const server::ClientUpdate& update, Method method, std::size_t classifier_size = 0);
/// `mask` is the client's critical mask (read by fedcac after beta).
Transfer account_downlink(const ParamVector& combined, Method method, std::size_t round, std::size_t beta,
                          const Mask& mask, std::size_t classifier_size = 0);

struct LedgerEntry {
  std::size_t round = 0;
  std::size_t client = 0;
  Transfer uplink;
  Transfer downlink;
};

struct CommLedger {
  std::vector<LedgerEntry> entries;

  std::uint64_t total_uplink_bytes() const;
  std::uint64_t total_downlink_bytes() const;
};

struct MetricsRow {
  std::size_t round = 0;
  /// Measured after local training, before aggregation.
  std::vector<double> client_accuracy;
  std::vector<double> client_train_loss;
  double mean_accuracy = 0.0;
  double mean_train_loss = 0.0;
  /// Running max of mean_accuracy up to this round.
  double best_mean_accuracy = 0.0;
};

/// Test-only intervention points.
struct RunHooks {
  /// Replaces the scheduled collaboration threshold in every round.
  std::optional<double> threshold_override;
  /// Called on each client's scores before the mask is built.
  std::function<void(std::size_t round, std::size_t client, saliency::SaliencyScores&)> on_scores;
};

struct RunResult {
  std::vector<MetricsRow> metrics;
  CommLedger ledger;
  /// Models after the final aggregation.
  std::vector<ParamVector> final_models;
  std::size_t param_count = 0;
  std::size_t classifier_size = 0;
  double best_mean_accuracy = 0.0;
  std::size_t best_round = 0;
  std::vector<data::ExhaustionEvent> exhaustion;
  /// Selected entries dropped by the cutoff, summed over clients and rounds.
  std::size_t cutoff_removals = 0;
  /// Per client, per parameter: rounds in which it was critical
  /// (fedpurin/fedcac only).
  std::vector<std::vector<std::uint32_t>> selection_counts;
  /// Per parameter: rounds in which the aggregated global model was nonzero.
  std::vector<std::uint32_t> global_nonzero_counts;
};

/// Builds the dataset named by cfg.data.
Dataset load_dataset(const RunConfig& cfg);

/// Runs cfg.method for cfg.rounds rounds on `ds`. Clients are trained in
/// parallel; results do not depend on the thread count.
RunResult run(const RunConfig& cfg, const Dataset& ds, const RunHooks& hooks = {});
RunResult run(const RunConfig& cfg, const RunHooks& hooks = {});

}  // namespace fedpurin::sim
