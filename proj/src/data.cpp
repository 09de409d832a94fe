#include "fedpurin/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>

#include "fedpurin/errors.hpp"
#include "fedpurin/rng.hpp"

namespace fedpurin::data {

Dataset generate_synthetic(std::size_t num_classes, std::size_t feature_dim, std::size_t samples_per_class,
                           double separation, std::uint64_t seed) {
  if (num_classes == 0 || feature_dim == 0 || samples_per_class == 0) {
    throw ConfigError("synthetic dataset dimensions must be positive");
  }
  rng::SplitMix64 gen(seed);
  Matrix means(num_classes, feature_dim);
  for (double& m : means.data) m = separation * gen.normal();

  Dataset ds;
  ds.num_classes = num_classes;
  ds.features = Matrix(num_classes * samples_per_class, feature_dim);
  ds.labels.reserve(num_classes * samples_per_class);
  std::size_t r = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    for (std::size_t s = 0; s < samples_per_class; ++s, ++r) {
      auto row = ds.features.row(r);
      for (std::size_t f = 0; f < feature_dim; ++f) row[f] = means(c, f) + gen.normal();
      ds.labels.push_back(c);
    }
  }
  return ds;
}

void PartitionSpec::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be > 0");
  if (num_clients == 0) throw ConfigError("num_clients must be >= 1");
  if (train_per_client == 0 || test_per_client == 0) throw ConfigError("per-client sample counts must be >= 1");
}

namespace {

std::vector<double> dirichlet(rng::SplitMix64& gen, std::size_t k, double alpha) {
  std::vector<double> logs(k);
  for (auto& l : logs) l = gen.log_gamma_variate(alpha);
  const double mx = *std::max_element(logs.begin(), logs.end());
  std::vector<double> p(k);
  double s = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    p[c] = std::exp(logs[c] - mx);
    s += p[c];
  }
  for (auto& v : p) v /= s;
  return p;
}

// Index drawn from the unnormalized weights; weights must have positive sum.
std::size_t categorical(rng::SplitMix64& gen, const std::vector<double>& w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  const double u = gen.uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    if (w[c] <= 0.0) continue;
    acc += w[c];
    last = c;
    if (u < acc) return c;
  }
  return last;
}

struct Pools {
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::size_t> used;

  std::size_t remaining(std::size_t c) const { return members[c].size() - used[c]; }
  std::size_t take(std::size_t c) { return members[c][used[c]++]; }
};

std::vector<std::size_t> fill_shard(rng::SplitMix64& gen, Pools& pools, const std::vector<double>& p,
                                    std::size_t count, std::size_t client, bool test_split,
                                    std::vector<ExhaustionEvent>& events) {
  const std::size_t k = p.size();
  std::vector<std::size_t> want(k, 0);
  for (std::size_t s = 0; s < count; ++s) ++want[categorical(gen, p)];

  std::vector<std::size_t> out;
  out.reserve(count);
  std::size_t shortfall = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t got = std::min(want[c], pools.remaining(c));
    for (std::size_t s = 0; s < got; ++s) out.push_back(pools.take(c));
    if (got < want[c]) {
      events.push_back({client, c, want[c] - got, test_split});
      shortfall += want[c] - got;
    }
  }
  while (shortfall > 0) {
    std::vector<double> w(k, 0.0);
    double mass = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      if (pools.remaining(c) > 0) {
        w[c] = p[c];
        mass += p[c];
      }
    }
    if (mass <= 0.0) {
      for (std::size_t c = 0; c < k; ++c) w[c] = static_cast<double>(pools.remaining(c));
      mass = std::accumulate(w.begin(), w.end(), 0.0);
    }
    if (mass <= 0.0) {
      throw ConfigError("dataset too small: pools exhausted while filling client " + std::to_string(client));
    }
    out.push_back(pools.take(categorical(gen, w)));
    --shortfall;
  }
  return out;
}

}  // namespace

Partition dirichlet_partition(const Dataset& ds, const PartitionSpec& spec) {
  spec.validate();
  ds.validate();
  const std::size_t need = spec.num_clients * (spec.train_per_client + spec.test_per_client);
  if (ds.size() < need) {
    throw ConfigError("dataset has " + std::to_string(ds.size()) + " samples but the partition needs " +
                      std::to_string(need));
  }

  Pools pools{std::vector<std::vector<std::size_t>>(ds.num_classes), std::vector<std::size_t>(ds.num_classes, 0)};
  for (std::size_t i = 0; i < ds.size(); ++i) pools.members[ds.labels[i]].push_back(i);
  rng::SplitMix64 pool_gen(rng::derive_seed(spec.seed, 0x706f6f6c));
  for (auto& m : pools.members) {
    for (std::size_t i = m.size(); i-- > 1;) std::swap(m[i], m[pool_gen.below(i + 1)]);
  }

  Partition part;
  part.clients.reserve(spec.num_clients);
  for (std::size_t client = 0; client < spec.num_clients; ++client) {
    rng::SplitMix64 gen(rng::derive_seed(spec.seed, client, 0x73686172));
    ClientShard shard;
    shard.proportions = dirichlet(gen, ds.num_classes, spec.alpha);
    shard.train_indices =
        fill_shard(gen, pools, shard.proportions, spec.train_per_client, client, false, part.exhaustion);
    shard.test_indices =
        fill_shard(gen, pools, shard.proportions, spec.test_per_client, client, true, part.exhaustion);
    shard.train = ds.subset(shard.train_indices);
    shard.test = ds.subset(shard.test_indices);
    part.clients.push_back(std::move(shard));
  }
  return part;
}

namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at, const std::filesystem::path& path) {
  if (at + 4 > b.size()) throw FormatError(path.string() + ": truncated header", b.size());
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_bytes(images);
  if (const auto magic = read_be32(img, 0, images); magic != 0x00000803) {
    throw FormatError(images.string() + ": bad image magic " + std::to_string(magic), 0);
  }
  const std::size_t n = read_be32(img, 4, images);
  const std::size_t rows = read_be32(img, 8, images);
  const std::size_t cols = read_be32(img, 12, images);
  const std::size_t dim = rows * cols;
  if (dim == 0) throw FormatError(images.string() + ": zero-sized image", 8);
  if (img.size() < 16 + n * dim) {
    throw FormatError(images.string() + ": expected " + std::to_string(n * dim) + " pixel bytes", img.size());
  }

  const auto lab = read_bytes(labels);
  if (const auto magic = read_be32(lab, 0, labels); magic != 0x00000801) {
    throw FormatError(labels.string() + ": bad label magic " + std::to_string(magic), 0);
  }
  if (const std::size_t nl = read_be32(lab, 4, labels); nl != n) {
    throw FormatError(labels.string() + ": " + std::to_string(nl) + " labels for " + std::to_string(n) + " images", 4);
  }
  if (lab.size() < 8 + n) throw FormatError(labels.string() + ": truncated labels", lab.size());

  Dataset ds;
  ds.features = Matrix(n, dim);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n * dim; ++i) ds.features.data[i] = static_cast<double>(img[16 + i]) / 255.0;
  std::size_t max_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ds.labels[i] = lab[8 + i];
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = n == 0 ? 0 : max_label + 1;
  return ds;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  std::string line;
  std::size_t offset = 0;
  if (!std::getline(in, line) || line.rfind("label", 0) != 0) {
    throw FormatError(path.string() + ": missing `label,f0,...` header", 0);
  }
  const auto cols = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  if (cols == 0) throw FormatError(path.string() + ": header has no feature columns", 0);
  offset += line.size() + 1;

  Dataset ds;
  std::vector<double> values;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      offset += 1;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::size_t field = 0;
    try {
      while (std::getline(ss, cell, ',')) {
        if (field == 0) {
          const long label = std::stol(cell);
          if (label < 0) throw std::invalid_argument("negative label");
          ds.labels.push_back(static_cast<std::size_t>(label));
          max_label = std::max(max_label, ds.labels.back());
        } else {
          values.push_back(std::stod(cell));
        }
        ++field;
      }
    } catch (const std::exception&) {
      throw FormatError(path.string() + ": bad value `" + cell + "`", offset);
    }
    if (field != cols + 1) {
      throw FormatError(path.string() + ": row has " + std::to_string(field) + " fields, expected " +
                            std::to_string(cols + 1),
                        offset);
    }
    offset += line.size() + 1;
  }
  ds.features.rows = ds.labels.size();
  ds.features.cols = cols;
  ds.features.data = std::move(values);
  ds.num_classes = ds.labels.empty() ? 0 : max_label + 1;
  return ds;
}

}  // namespace fedpurin::data
