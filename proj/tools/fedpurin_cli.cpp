// fedpurin: run, sweep and compare sparse personalized FL simulations.
//
//   fedpurin run --config PATH [--set key=value]... --seed K --out DIR
//   fedpurin sweep --config PATH [--config PATH]... [--set key=value]... --seeds K1,K2,... --out DIR
//   fedpurin compare DIR... [--csv FILE]
//
// Exit codes: 0 success, 1 config error, 2 run failure.

#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "fedpurin/config.hpp"
#include "fedpurin/errors.hpp"
#include "fedpurin/orchestrator.hpp"
#include "fedpurin/reporting.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kRunFailure = 2;

fedpurin::ConfigEntries to_entries(const std::vector<std::string>& sets) {
  fedpurin::ConfigEntries out;
  for (const auto& s : sets) out.push_back(fedpurin::split_assignment(s));
  return out;
}

int cmd_run(const std::string& config, const std::vector<std::string>& sets, std::uint64_t seed,
            const std::string& out) {
  auto overrides = to_entries(sets);
  overrides.emplace_back("seed", std::to_string(seed));
  const auto cfg = fedpurin::parse_config(config, overrides);
  const auto result = fedpurin::sim::run(cfg);
  const auto dir = std::filesystem::path(out) / fedpurin::report::run_dir_name(cfg);
  fedpurin::report::write_run(dir, cfg, result);
  std::cout << dir.string() << ": best mean accuracy " << result.best_mean_accuracy << " (round "
            << result.best_round << "), uplink " << result.ledger.total_uplink_bytes() << " B, downlink "
            << result.ledger.total_downlink_bytes() << " B\n";
  return kOk;
}

int cmd_sweep(const std::vector<std::string>& configs, const std::vector<std::string>& sets,
              const std::vector<std::uint64_t>& seeds, const std::string& out) {
  const auto overrides = to_entries(sets);
  std::vector<fedpurin::RunConfig> cfgs;
  std::vector<std::string> labels;
  std::multiset<std::string> methods;
  for (const auto& c : configs) {
    cfgs.push_back(fedpurin::parse_config(c, overrides));
    methods.insert(fedpurin::to_string(cfgs.back().method));
  }
  // Configs sharing a method go into per-config subdirectories.
  for (std::size_t k = 0; k < cfgs.size(); ++k) {
    const bool clash = methods.count(fedpurin::to_string(cfgs[k].method)) > 1;
    labels.push_back(clash ? std::filesystem::path(configs[k]).stem().string() : std::string());
  }
  if (cfgs.empty()) cfgs.push_back(fedpurin::parse_config({}, overrides));

  const auto result = fedpurin::report::sweep(cfgs, labels, seeds, out, std::cerr);
  fedpurin::report::write_sweep_csv(std::cout, result.rows);
  return result.failures > 0 ? kRunFailure : kOk;
}

int cmd_compare(const std::vector<std::string>& dirs, const std::string& csv) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  const auto rows = fedpurin::report::compare(paths);
  fedpurin::report::write_compare_text(std::cout, rows);
  if (!csv.empty()) {
    std::ofstream os(csv);
    if (!os) throw fedpurin::ConfigError("cannot write " + csv);
    fedpurin::report::write_compare_csv(os, rows);
  } else {
    std::cout << '\n';
    fedpurin::report::write_compare_csv(std::cout, rows);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse personalized federated learning simulator"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  std::vector<std::string> run_sets;
  std::uint64_t run_seed = 0;
  auto* run = app.add_subcommand("run", "Run one configuration with one seed");
  run->add_option("--config", run_config, "Config file (key = value lines)");
  run->add_option("--set", run_sets, "Override, key=value (repeatable)");
  run->add_option("--seed", run_seed, "Run seed")->required();
  run->add_option("--out", run_out, "Output directory")->required();

  std::vector<std::string> sweep_configs, sweep_sets;
  std::vector<std::uint64_t> sweep_seeds;
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "Run configurations over several seeds");
  sweep->add_option("--config", sweep_configs, "Config file (repeatable)");
  sweep->add_option("--set", sweep_sets, "Override applied to every config (repeatable)");
  sweep->add_option("--seeds", sweep_seeds, "Comma-separated seeds")->required()->delimiter(',');
  sweep->add_option("--out", sweep_out, "Output directory")->required();

  std::vector<std::string> compare_dirs;
  std::string compare_csv;
  auto* compare = app.add_subcommand("compare", "Tabulate accuracy and traffic across runs");
  compare->add_option("dirs", compare_dirs, "Run or sweep directories")->required();
  compare->add_option("--csv", compare_csv, "Write the table as CSV to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(run_config, run_sets, run_seed, run_out);
    if (*sweep) return cmd_sweep(sweep_configs, sweep_sets, sweep_seeds, sweep_out);
    if (*compare) return cmd_compare(compare_dirs, compare_csv);
  } catch (const fedpurin::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const fedpurin::FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << '\n';
    return kRunFailure;
  }
  return kOk;
}
