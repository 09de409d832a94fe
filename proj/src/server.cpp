#include "fedpurin/server.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fedpurin/errors.hpp"
#include "fedpurin/kernels.hpp"

namespace fedpurin::server {

ClientUpdate make_update(std::size_t client_id, const ParamVector& theta, const Mask& mask) {
  return {client_id, apply_mask(theta, mask), mask};
}

double OverlapMatrix::average() const {
  if (n_ < 2) throw ConfigError("overlap statistics need at least two clients");
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (i != j) s += at(i, j);
    }
  }
  return s / static_cast<double>(n_ * (n_ - 1));
}

double OverlapMatrix::maximum() const {
  if (n_ < 2) throw ConfigError("overlap statistics need at least two clients");
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < n_; ++j) {
      if (i != j) m = std::max(m, at(i, j));
    }
  }
  return m;
}

double overlap(const Mask& a, const Mask& b) {
  const std::size_t total = a.popcount() + b.popcount();
  const std::size_t diff = a.hamming(b);
  if (total == 0) return 1.0;
  return 1.0 - static_cast<double>(diff) / static_cast<double>(total);
}

OverlapMatrix overlap_matrix(std::span<const Mask> masks) {
  OverlapMatrix o(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (std::size_t j = i + 1; j < masks.size(); ++j) o.set(i, j, overlap(masks[i], masks[j]));
  }
  return o;
}

double threshold(std::size_t round, const OverlapMatrix& o, std::size_t beta) {
  if (beta == 0) throw ConfigError("beta must be >= 1");
  const double fraction = static_cast<double>(round) / static_cast<double>(beta);
  return std::lerp(o.average(), o.maximum(), fraction);
}

CollabPlan plan_collaboration(const OverlapMatrix& o, double thr) {
  CollabPlan plan{thr, std::vector<std::vector<std::size_t>>(o.clients())};
  for (std::size_t i = 0; i < o.clients(); ++i) {
    for (std::size_t j = 0; j < o.clients(); ++j) {
      if (j != i && o.at(i, j) >= thr) plan.sets[i].push_back(j);
    }
  }
  return plan;
}

CollabPlan plan_for_round(std::size_t round, const OverlapMatrix& o, std::size_t beta) {
  if (o.clients() < 2 || round > beta) {
    return {std::numeric_limits<double>::infinity(), std::vector<std::vector<std::size_t>>(o.clients())};
  }
  return plan_collaboration(o, threshold(round, o, beta));
}

ParamVector group_mean(std::span<const ParamVector> models, std::span<const std::size_t> members) {
  if (members.empty()) throw ProtocolError("group mean over an empty group");
  for (auto m : members) {
    if (m >= models.size()) throw ProtocolError("group member " + std::to_string(m) + " has no model");
  }
  std::vector<const double*> rows;
  rows.reserve(members.size());
  const ParamVector& first = models[members.front()];
  for (auto m : members) {
    if (models[m].size() != first.size()) throw ProtocolError("group members differ in parameter count");
    rows.push_back(models[m].values.data());
  }
  ParamVector out(std::vector<double>(first.size()), first.layout);
  kernels::mean_rows(rows, out.values);
  return out;
}

namespace {

// Position of each client id in `updates`, checking lengths agree.
std::vector<std::size_t> index_by_client(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw ProtocolError("no client updates");
  std::size_t max_id = 0;
  for (const auto& u : updates) max_id = std::max(max_id, u.client_id);
  std::vector<std::size_t> pos(max_id + 1, std::numeric_limits<std::size_t>::max());
  for (std::size_t k = 0; k < updates.size(); ++k) {
    const auto& u = updates[k];
    if (u.sparse_params.size() != updates.front().sparse_params.size() || u.mask.size() != u.sparse_params.size()) {
      throw ProtocolError("update from client " + std::to_string(u.client_id) + " is misaligned");
    }
    if (pos[u.client_id] != std::numeric_limits<std::size_t>::max()) {
      throw ProtocolError("duplicate update from client " + std::to_string(u.client_id));
    }
    pos[u.client_id] = k;
  }
  return pos;
}

ParamVector mean_of_updates(std::span<const ClientUpdate> updates, const std::vector<std::size_t>& pos,
                            std::span<const std::size_t> clients) {
  std::vector<const double*> rows;
  rows.reserve(clients.size());
  for (auto c : clients) {
    if (c >= pos.size() || pos[c] == std::numeric_limits<std::size_t>::max()) {
      throw ProtocolError("missing update for client " + std::to_string(c));
    }
    rows.push_back(updates[pos[c]].sparse_params.values.data());
  }
  const auto& ref = updates.front().sparse_params;
  ParamVector out(std::vector<double>(ref.size()), ref.layout);
  kernels::mean_rows(rows, out.values);
  return out;
}

}  // namespace

ParamVector grouped_model(std::span<const ClientUpdate> updates, const CollabPlan& plan, std::size_t client) {
  const auto pos = index_by_client(updates);
  if (client >= plan.sets.size()) throw ProtocolError("client " + std::to_string(client) + " not in plan");
  std::vector<std::size_t> members = plan.sets[client];
  members.push_back(client);
  std::sort(members.begin(), members.end());
  return mean_of_updates(updates, pos, members);
}

ParamVector global_model(std::span<const ClientUpdate> updates) {
  const auto pos = index_by_client(updates);
  std::vector<std::size_t> ids;
  for (std::size_t c = 0; c < pos.size(); ++c) {
    if (pos[c] != std::numeric_limits<std::size_t>::max()) ids.push_back(c);
  }
  return mean_of_updates(updates, pos, ids);
}

ParamVector combine(const ParamVector& delta, const ParamVector& global, const Mask& mask) {
  ParamVector out(std::vector<double>(delta.size()), delta.layout);
  kernels::select(mask, delta.values, global.values, out.values);
  return out;
}

}  // namespace fedpurin::server
