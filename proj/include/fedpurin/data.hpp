#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fedpurin/dataset.hpp"

namespace fedpurin::data {

/// Gaussian class clusters. Class c has mean `separation * z_c` with
/// z_c ~ N(0, I) drawn once; its samples are mean + N(0, I). Samples are
/// stored class by class.
Dataset generate_synthetic(std::size_t num_classes, std::size_t feature_dim, std::size_t samples_per_class,
                           double separation, std::uint64_t seed);

struct PartitionSpec {
  double alpha = 0.1;
  std::size_t num_clients = 20;
  std::size_t train_per_client = 50;
  std::size_t test_per_client = 10;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const PartitionSpec&) const = default;
};

struct ClientShard {
  Dataset train;
  Dataset test;
  /// Rows of the source dataset, in shard order.
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
  /// The Dir(alpha) class proportions drawn for this client.
  std::vector<double> proportions;
};

/// A class ran out while filling a shard; `shortfall` samples were redrawn
/// from the classes that still had data.
struct ExhaustionEvent {
  std::size_t client = 0;
  std::size_t class_id = 0;
  std::size_t shortfall = 0;
  bool test_split = false;
};

struct Partition {
  std::vector<ClientShard> clients;
  std::vector<ExhaustionEvent> exhaustion;
};

/// Each client draws p ~ Dir(alpha * 1) and then per-sample labels from
/// Categorical(p) for its train and test shards; samples come without
/// replacement from per-class pools shared by all clients, so shards are
/// disjoint. When a class pool runs dry the missing samples are redrawn
/// from the remaining classes in proportion to p (or to what is left, if p
/// puts no mass there), and an ExhaustionEvent is recorded.
/// Throws ConfigError when the dataset cannot supply every shard.
Partition dirichlet_partition(const Dataset& ds, const PartitionSpec& spec);

/// IDX image file (magic 0x00000803, pixels scaled to [0, 1]) paired by
/// index with an IDX label file (magic 0x00000801). Throws FormatError.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

/// CSV with header `label,f0,f1,...`. Features are read as-is and
/// num_classes is one more than the largest label. Throws FormatError.
Dataset load_csv(const std::filesystem::path& path);

}  // namespace fedpurin::data
