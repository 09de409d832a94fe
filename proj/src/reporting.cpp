#include "fedpurin/reporting.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fedpurin/errors.hpp"

namespace fedpurin::report {

using json = nlohmann::ordered_json;

namespace {

// Shortest text that reads back to the same double.
std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

double per_client_round(std::uint64_t total, const sim::RunResult& r) {
  const auto n = r.metrics.empty() ? 0 : r.metrics.front().client_accuracy.size();
  const double denom = static_cast<double>(n * r.metrics.size());
  return denom > 0 ? static_cast<double>(total) / denom : 0.0;
}

}  // namespace

void write_metrics_csv(std::ostream& os, const sim::RunResult& r) {
  os << "round,client_id,test_acc,train_loss\n";
  for (const auto& m : r.metrics) {
    for (std::size_t i = 0; i < m.client_accuracy.size(); ++i) {
      os << m.round << ',' << i << ',' << num(m.client_accuracy[i]) << ',' << num(m.client_train_loss[i]) << '\n';
    }
  }
}

void write_ledger_csv(std::ostream& os, const sim::RunResult& r) {
  os << "round,client_id,uplink_bytes,downlink_bytes,uplink_nnz,downlink_nnz\n";
  for (const auto& e : r.ledger.entries) {
    os << e.round << ',' << e.client << ',' << e.uplink.bytes << ',' << e.downlink.bytes << ',' << e.uplink.nnz
       << ',' << e.downlink.nnz << '\n';
  }
}

std::string summary_json(const RunConfig& cfg, const sim::RunResult& r) {
  json j;
  json conf = json::object();
  for (const auto& [k, v] : config_entries(cfg)) conf[k] = v;
  j["config"] = conf;
  j["method"] = to_string(cfg.method);
  j["seed"] = cfg.seed;
  j["num_clients"] = cfg.num_clients;
  j["rounds"] = cfg.rounds;
  j["param_count"] = r.param_count;
  j["classifier_size"] = r.classifier_size;
  j["best_mean_accuracy"] = r.best_mean_accuracy;
  j["best_round"] = r.best_round;
  j["final_mean_accuracy"] = r.metrics.empty() ? 0.0 : r.metrics.back().mean_accuracy;
  j["total_uplink_bytes"] = r.ledger.total_uplink_bytes();
  j["total_downlink_bytes"] = r.ledger.total_downlink_bytes();
  j["mean_uplink_bytes_per_client_round"] = per_client_round(r.ledger.total_uplink_bytes(), r);
  j["mean_downlink_bytes_per_client_round"] = per_client_round(r.ledger.total_downlink_bytes(), r);
  j["cutoff_removals"] = r.cutoff_removals;
  json ex = json::array();
  for (const auto& e : r.exhaustion) {
    ex.push_back({{"client", e.client}, {"class", e.class_id}, {"shortfall", e.shortfall},
                  {"split", e.test_split ? "test" : "train"}});
  }
  j["partition_exhaustion"] = ex;
  j["notes"] = json::array({"values count 4 bytes and masks 1 bit per element",
                            "fedpurin downlink counts nonzero values only; no position information is charged"});
  return j.dump(2) + "\n";
}

std::string run_dir_name(const RunConfig& cfg) { return to_string(cfg.method) + "_seed" + std::to_string(cfg.seed); }

void write_run(const std::filesystem::path& dir, const RunConfig& cfg, const sim::RunResult& r) {
  std::filesystem::create_directories(dir);
  std::ostringstream metrics, ledger;
  write_metrics_csv(metrics, r);
  write_ledger_csv(ledger, r);
  write_file(dir / "metrics.csv", metrics.str());
  write_file(dir / "ledger.csv", ledger.str());
  write_file(dir / "summary.json", summary_json(cfg, r));
  write_file(dir / "config.txt", write_config(cfg));
  if (!r.selection_counts.empty()) {
    std::ostringstream os;
    os << "param_index";
    for (std::size_t i = 0; i < r.selection_counts.size(); ++i) os << ",client_" << i;
    os << ",global_nonzero\n";
    for (std::size_t j = 0; j < r.param_count; ++j) {
      os << j;
      for (const auto& c : r.selection_counts) os << ',' << c[j];
      os << ',' << r.global_nonzero_counts[j] << '\n';
    }
    write_file(dir / "activation_counts.csv", os.str());
  }
}

RunStats stats_of(const sim::RunResult& r, const RunConfig& cfg) {
  return {to_string(cfg.method),
          cfg.seed,
          r.param_count,
          r.best_mean_accuracy,
          per_client_round(r.ledger.total_uplink_bytes(), r),
          per_client_round(r.ledger.total_downlink_bytes(), r)};
}

RunStats read_summary(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "summary.json";
  std::ifstream in(path);
  if (!in) throw ConfigError("missing summary: " + path.string());
  try {
    const auto j = json::parse(in);
    return {j.at("method").get<std::string>(),
            j.at("seed").get<std::uint64_t>(),
            j.at("param_count").get<std::size_t>(),
            j.at("best_mean_accuracy").get<double>(),
            j.at("mean_uplink_bytes_per_client_round").get<double>(),
            j.at("mean_downlink_bytes_per_client_round").get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError("invalid summary " + path.string() + ": " + e.what());
  }
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double s = 0.0;
  for (double x : xs) s += x;
  const double mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

SweepRow summarize(const std::string& label, const std::vector<RunStats>& runs, std::size_t failures) {
  std::vector<double> acc, up, down;
  for (const auto& r : runs) {
    acc.push_back(r.best_mean_accuracy);
    up.push_back(r.uplink_bytes);
    down.push_back(r.downlink_bytes);
  }
  SweepRow row{label, runs.size(), failures};
  std::tie(row.acc_mean, row.acc_std) = mean_std(acc);
  std::tie(row.up_mean, row.up_std) = mean_std(up);
  std::tie(row.down_mean, row.down_std) = mean_std(down);
  return row;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "label,runs,failures,best_acc_mean,best_acc_std,uplink_bytes_mean,uplink_bytes_std,downlink_bytes_mean,"
        "downlink_bytes_std\n";
  for (const auto& r : rows) {
    os << r.label << ',' << r.runs << ',' << r.failures << ',' << num(r.acc_mean) << ',' << num(r.acc_std) << ','
       << num(r.up_mean) << ',' << num(r.up_std) << ',' << num(r.down_mean) << ',' << num(r.down_std) << '\n';
  }
}

SweepResult sweep(const std::vector<RunConfig>& configs, const std::vector<std::string>& labels,
                  const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out, std::ostream& log) {
  if (seeds.empty()) throw ConfigError("seeds: sweep needs at least one seed");
  SweepResult result;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    const std::string& sub = c < labels.size() ? labels[c] : std::string();
    std::vector<RunStats> stats;
    std::size_t failures = 0;
    for (auto seed : seeds) {
      RunConfig cfg = configs[c];
      cfg.seed = seed;
      const auto dir = (sub.empty() ? out : out / sub) / run_dir_name(cfg);
      try {
        const auto r = sim::run(cfg);
        write_run(dir, cfg, r);
        stats.push_back(stats_of(r, cfg));
        log << dir.string() << ": best mean accuracy " << num(r.best_mean_accuracy) << '\n';
      } catch (const std::exception& e) {
        ++failures;
        log << dir.string() << ": FAILED: " << e.what() << '\n';
      }
    }
    result.failures += failures;
    const std::string label = sub.empty() ? to_string(configs[c].method) : sub + "/" + to_string(configs[c].method);
    result.rows.push_back(summarize(label, stats, failures));
  }
  std::filesystem::create_directories(out);
  std::ostringstream os;
  write_sweep_csv(os, result.rows);
  write_file(out / "sweep_summary.csv", os.str());
  return result;
}

std::vector<CompareRow> compare(const std::vector<std::filesystem::path>& dirs) {
  std::vector<std::filesystem::path> runs;
  for (const auto& d : dirs) {
    if (std::filesystem::exists(d / "summary.json")) {
      runs.push_back(d);
      continue;
    }
    std::vector<std::filesystem::path> found;
    if (std::filesystem::is_directory(d)) {
      for (const auto& e : std::filesystem::recursive_directory_iterator(d)) {
        if (e.is_regular_file() && e.path().filename() == "summary.json") found.push_back(e.path().parent_path());
      }
    }
    if (found.empty()) throw ConfigError("missing summary: " + (d / "summary.json").string());
    std::sort(found.begin(), found.end());
    runs.insert(runs.end(), found.begin(), found.end());
  }

  std::vector<std::string> order;
  std::map<std::string, std::vector<RunStats>> by_method;
  for (const auto& r : runs) {
    auto s = read_summary(r);
    if (!by_method.contains(s.method)) order.push_back(s.method);
    by_method[s.method].push_back(std::move(s));
  }

  constexpr double kMiB = 1024.0 * 1024.0;
  std::vector<CompareRow> rows;
  for (const auto& m : order) {
    const auto& group = by_method[m];
    CompareRow row{m, group.size()};
    double up = 0.0, down = 0.0, full = 0.0;
    for (const auto& s : group) {
      row.best_mean_accuracy += s.best_mean_accuracy;
      up += s.uplink_bytes;
      down += s.downlink_bytes;
      full += 4.0 * static_cast<double>(s.param_count);
    }
    const double k = static_cast<double>(group.size());
    row.best_mean_accuracy /= k;
    row.uplink_mib = up / k / kMiB;
    row.downlink_mib = down / k / kMiB;
    row.uplink_reduction_pct = full > 0 ? 100.0 * (1.0 - up / full) : 0.0;
    row.downlink_reduction_pct = full > 0 ? 100.0 * (1.0 - down / full) : 0.0;
    rows.push_back(row);
  }
  return rows;
}

void write_compare_text(std::ostream& os, const std::vector<CompareRow>& rows) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %5s %10s %14s %14s %9s %9s\n", "method", "runs", "best_acc", "uplink_MiB/rd",
                "downlink_MiB/rd", "up_red%", "down_red%");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %5zu %10.4f %14.6f %14.6f %9.2f %9.2f\n", r.method.c_str(), r.runs,
                  r.best_mean_accuracy, r.uplink_mib, r.downlink_mib, r.uplink_reduction_pct,
                  r.downlink_reduction_pct);
    os << buf;
  }
}

void write_compare_csv(std::ostream& os, const std::vector<CompareRow>& rows) {
  os << "method,runs,best_mean_accuracy,uplink_mib_per_round,downlink_mib_per_round,uplink_reduction_pct,"
        "downlink_reduction_pct\n";
  for (const auto& r : rows) {
    os << r.method << ',' << r.runs << ',' << num(r.best_mean_accuracy) << ',' << num(r.uplink_mib) << ','
       << num(r.downlink_mib) << ',' << num(r.uplink_reduction_pct) << ',' << num(r.downlink_reduction_pct) << '\n';
  }
}

}  // namespace fedpurin::report
