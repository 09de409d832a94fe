#include "fedpurin/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "fedpurin/errors.hpp"

namespace fedpurin {

std::string to_string(Method m) {
  switch (m) {
    case Method::fedpurin: return "fedpurin";
    case Method::fedavg: return "fedavg";
    case Method::separate: return "separate";
    case Method::fedcac: return "fedcac";
    case Method::fedper: return "fedper";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  for (auto m : {Method::fedpurin, Method::fedavg, Method::separate, Method::fedcac, Method::fedper}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("method: unknown method `" + s + "`");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Shortest text that reads back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::size_t as_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a nonnegative integer, got `" + v + "`");
  return out;
}

std::uint64_t as_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError(key + ": expected a nonnegative integer, got `" + v + "`");
  return out;
}

double as_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got `" + v + "`");
  }
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key + ": expected true or false, got `" + v + "`");
}

std::vector<std::size_t> as_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(as_size(key, trim(item)));
  return out;
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> a{
      {"tau", "score.tau"},       {"cutoff", "score.cutoff"}, {"alpha", "partition.alpha"},
      {"N", "num_clients"},       {"T", "rounds"},            {"E", "local_epochs"},
  };
  return a;
}

void set_key(RunConfig& c, const std::string& raw_key, const std::string& v) {
  const auto it = aliases().find(raw_key);
  const std::string& key = it == aliases().end() ? raw_key : it->second;

  if (key == "method") {
    c.method = parse_method(v);
  } else if (key == "num_clients") {
    c.num_clients = as_size(key, v);
  } else if (key == "rounds") {
    c.rounds = as_size(key, v);
  } else if (key == "local_epochs") {
    c.local_epochs = as_size(key, v);
  } else if (key == "lr") {
    c.lr = as_double(key, v);
  } else if (key == "batch_size") {
    c.batch_size = as_size(key, v);
  } else if (key == "beta") {
    c.beta = as_size(key, v);
  } else if (key == "seed") {
    c.seed = as_u64(key, v);
  } else if (key == "score.tau") {
    c.score.tau = as_double(key, v);
  } else if (key == "score.cutoff") {
    c.score.cutoff = as_double(key, v);
  } else if (key == "score.gradient") {
    if (v == "exact_grad") {
      c.score.gradient_source = saliency::GradientSource::exact_grad;
    } else if (v == "delta_theta") {
      c.score.gradient_source = saliency::GradientSource::delta_theta;
    } else {
      throw ConfigError(key + ": expected exact_grad or delta_theta, got `" + v + "`");
    }
  } else if (key == "score.hessian") {
    c.score.include_hessian_term = as_bool(key, v);
  } else if (key == "partition.alpha") {
    c.partition.alpha = as_double(key, v);
  } else if (key == "partition.train_per_client") {
    c.partition.train_per_client = as_size(key, v);
  } else if (key == "partition.test_per_client") {
    c.partition.test_per_client = as_size(key, v);
  } else if (key == "model.hidden") {
    c.hidden = as_size_list(key, v);
  } else if (key == "data.source") {
    if (v == "synthetic") {
      c.data.source = DataSource::synthetic;
    } else if (v == "idx") {
      c.data.source = DataSource::idx;
    } else if (v == "csv") {
      c.data.source = DataSource::csv;
    } else {
      throw ConfigError(key + ": expected synthetic, idx or csv, got `" + v + "`");
    }
  } else if (key == "data.num_classes") {
    c.data.num_classes = as_size(key, v);
  } else if (key == "data.feature_dim") {
    c.data.feature_dim = as_size(key, v);
  } else if (key == "data.samples_per_class") {
    c.data.samples_per_class = as_size(key, v);
  } else if (key == "data.separation") {
    c.data.separation = as_double(key, v);
  } else if (key == "data.seed") {
    c.data.seed = as_u64(key, v);
  } else if (key == "data.images") {
    c.data.images = v;
  } else if (key == "data.labels") {
    c.data.labels = v;
  } else if (key == "data.csv") {
    c.data.csv = v;
  } else {
    throw ConfigError(raw_key + ": unknown config key");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (num_clients < 1) throw ConfigError("num_clients: must be >= 1");
  if (rounds < 1) throw ConfigError("rounds: must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr: must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
  if (beta < 1) throw ConfigError("beta: must be >= 1");
  if (!(score.tau > 0.0 && score.tau <= 1.0)) throw ConfigError("score.tau: tau out of (0,1]");
  if (!(score.cutoff >= 0.0)) throw ConfigError("score.cutoff: must be >= 0");
  if (!(partition.alpha > 0.0)) throw ConfigError("partition.alpha: must be > 0");
  if (partition.train_per_client < 1) throw ConfigError("partition.train_per_client: must be >= 1");
  if (partition.test_per_client < 1) throw ConfigError("partition.test_per_client: must be >= 1");
  for (auto h : hidden) {
    if (h == 0) throw ConfigError("model.hidden: widths must be positive");
  }
  switch (data.source) {
    case DataSource::synthetic:
      if (data.num_classes < 2) throw ConfigError("data.num_classes: must be >= 2");
      if (data.feature_dim < 1) throw ConfigError("data.feature_dim: must be >= 1");
      if (data.samples_per_class < 1) throw ConfigError("data.samples_per_class: must be >= 1");
      break;
    case DataSource::idx:
      if (data.images.empty()) throw ConfigError("data.images: required when data.source=idx");
      if (data.labels.empty()) throw ConfigError("data.labels: required when data.source=idx");
      break;
    case DataSource::csv:
      if (data.csv.empty()) throw ConfigError("data.csv: required when data.source=csv");
      break;
  }
}

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got `" + s + "`");
  auto key = trim(s.substr(0, eq));
  if (key.empty()) throw ConfigError("empty key in `" + s + "`");
  return {key, trim(s.substr(eq + 1))};
}

ConfigEntries parse_entries(const std::string& text) {
  ConfigEntries out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    out.push_back(split_assignment(line));
  }
  return out;
}

void apply_overrides(RunConfig& cfg, const ConfigEntries& entries) {
  for (const auto& [k, v] : entries) set_key(cfg, k, v);
}

RunConfig parse_config_text(const std::string& text, const ConfigEntries& overrides) {
  RunConfig cfg;
  apply_overrides(cfg, parse_entries(text));
  apply_overrides(cfg, overrides);
  cfg.validate();
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path, const ConfigEntries& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config_text(text, overrides);
}

ConfigEntries config_entries(const RunConfig& c) {
  std::string hidden;
  for (std::size_t k = 0; k < c.hidden.size(); ++k) hidden += (k ? "," : "") + std::to_string(c.hidden[k]);
  const char* source = c.data.source == DataSource::synthetic ? "synthetic"
                       : c.data.source == DataSource::idx     ? "idx"
                                                              : "csv";
  return {
      {"method", to_string(c.method)},
      {"num_clients", std::to_string(c.num_clients)},
      {"rounds", std::to_string(c.rounds)},
      {"local_epochs", std::to_string(c.local_epochs)},
      {"lr", fmt_double(c.lr)},
      {"batch_size", std::to_string(c.batch_size)},
      {"beta", std::to_string(c.beta)},
      {"seed", std::to_string(c.seed)},
      {"score.tau", fmt_double(c.score.tau)},
      {"score.cutoff", fmt_double(c.score.cutoff)},
      {"score.gradient",
       c.score.gradient_source == saliency::GradientSource::exact_grad ? "exact_grad" : "delta_theta"},
      {"score.hessian", c.score.include_hessian_term ? "true" : "false"},
      {"partition.alpha", fmt_double(c.partition.alpha)},
      {"partition.train_per_client", std::to_string(c.partition.train_per_client)},
      {"partition.test_per_client", std::to_string(c.partition.test_per_client)},
      {"model.hidden", hidden},
      {"data.source", source},
      {"data.num_classes", std::to_string(c.data.num_classes)},
      {"data.feature_dim", std::to_string(c.data.feature_dim)},
      {"data.samples_per_class", std::to_string(c.data.samples_per_class)},
      {"data.separation", fmt_double(c.data.separation)},
      {"data.seed", std::to_string(c.data.seed)},
      {"data.images", c.data.images},
      {"data.labels", c.data.labels},
      {"data.csv", c.data.csv},
  };
}

std::string write_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace fedpurin
