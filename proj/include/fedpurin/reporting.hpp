#pragma once

// Run artifacts and the multi-run views built on them.
//
// A run directory holds:
//   metrics.csv   round,client_id,test_acc,train_loss
//   ledger.csv    round,client_id,uplink_bytes,downlink_bytes,uplink_nnz,downlink_nnz
//   summary.json  config echo, best mean accuracy, byte totals
//   config.txt    the effective configuration
//   activation_counts.csv  (fedpurin/fedcac) per-parameter selection counts

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedpurin/config.hpp"
#include "fedpurin/orchestrator.hpp"

namespace fedpurin::report {

void write_metrics_csv(std::ostream& os, const sim::RunResult& r);
void write_ledger_csv(std::ostream& os, const sim::RunResult& r);
std::string summary_json(const RunConfig& cfg, const sim::RunResult& r);

/// `<method>_seed<k>`.
std::string run_dir_name(const RunConfig& cfg);
/// Writes every artifact into `dir`, creating it.
void write_run(const std::filesystem::path& dir, const RunConfig& cfg, const sim::RunResult& r);

/// Per-run numbers the sweep and compare tables are built from.
struct RunStats {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t param_count = 0;
  double best_mean_accuracy = 0.0;
  /// Mean bytes per client per round.
  double uplink_bytes = 0.0;
  double downlink_bytes = 0.0;
};

RunStats stats_of(const sim::RunResult& r, const RunConfig& cfg);
/// Reads a summary.json; throws ConfigError naming the file if absent.
RunStats read_summary(const std::filesystem::path& run_dir);

struct SweepRow {
  std::string label;
  std::size_t runs = 0;
  std::size_t failures = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  double up_mean = 0.0, up_std = 0.0;
  double down_mean = 0.0, down_std = 0.0;
};

/// Mean and sample standard deviation (0 for a single sample).
std::pair<double, double> mean_std(const std::vector<double>& xs);

SweepRow summarize(const std::string& label, const std::vector<RunStats>& runs, std::size_t failures);

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t failures = 0;
};

/// Runs every (config, seed) pair, writing each run under `out`, plus
/// `out/sweep_summary.csv`. A failing run is reported on `log` and skipped.
/// `labels` names each config's subdirectory ("" writes directly to `out`).
SweepResult sweep(const std::vector<RunConfig>& configs, const std::vector<std::string>& labels,
                  const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out, std::ostream& log);

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

struct CompareRow {
  std::string method;
  std::size_t runs = 0;
  double best_mean_accuracy = 0.0;
  double uplink_mib = 0.0;
  double downlink_mib = 0.0;
  /// Versus a full 4-byte-per-parameter exchange, i.e. FedAvg.
  double uplink_reduction_pct = 0.0;
  double downlink_reduction_pct = 0.0;
};

/// Expands directories without a summary.json into their run
/// subdirectories, then averages per method.
std::vector<CompareRow> compare(const std::vector<std::filesystem::path>& dirs);
void write_compare_text(std::ostream& os, const std::vector<CompareRow>& rows);
void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows);

}  // namespace fedpurin::report
