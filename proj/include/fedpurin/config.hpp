#pragma once

// Run configuration and its flat `key = value` text form. Keys are dotted
// (score.tau, partition.alpha, ...); `#` starts a comment. A few short
// aliases are accepted on input: tau, cutoff, alpha, N, T, E.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fedpurin/data.hpp"
#include "fedpurin/saliency.hpp"

namespace fedpurin {

enum class Method { fedpurin, fedavg, separate, fedcac, fedper };

std::string to_string(Method m);
Method parse_method(const std::string& s);

enum class DataSource { synthetic, idx, csv };

struct DataConfig {
  DataSource source = DataSource::synthetic;
  std::size_t num_classes = 10;
  std::size_t feature_dim = 32;
  std::size_t samples_per_class = 300;
  double separation = 0.5;
  std::uint64_t seed = 0;
  std::string images;
  std::string labels;
  std::string csv;

  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  Method method = Method::fedpurin;
  std::size_t num_clients = 20;
  std::size_t rounds = 200;
  std::size_t local_epochs = 5;
  double lr = 0.1;
  std::size_t batch_size = 10;
  std::size_t beta = 100;
  saliency::ScoreConfig score;
  /// alpha and per-client counts; num_clients and seed are filled from the
  /// run at partition time.
  data::PartitionSpec partition;
  std::vector<std::size_t> hidden{64, 32};
  DataConfig data;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

using ConfigEntries = std::vector<std::pair<std::string, std::string>>;

/// Applies `key=value` pairs on top of `cfg`. Unknown keys and malformed
/// values throw ConfigError naming the key.
void apply_overrides(RunConfig& cfg, const ConfigEntries& entries);

/// Parses `text` in the config file format.
ConfigEntries parse_entries(const std::string& text);
/// Splits "key=value"; throws ConfigError otherwise.
std::pair<std::string, std::string> split_assignment(const std::string& s);

/// Defaults, then the file (if `path` is non-empty), then `overrides`; the
/// result is validated.
RunConfig parse_config(const std::filesystem::path& path, const ConfigEntries& overrides = {});
RunConfig parse_config_text(const std::string& text, const ConfigEntries& overrides = {});

/// Every canonical key with its value, in a fixed order.
ConfigEntries config_entries(const RunConfig& cfg);
std::string write_config(const RunConfig& cfg);

}  // namespace fedpurin
