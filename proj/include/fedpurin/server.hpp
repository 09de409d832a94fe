#pragma once

// Server side of a round: mask overlaps, the rising collaboration threshold,
// per-client collaboration sets, grouped and global aggregation, and the
// combined model sent back to each client.
//
// Every mean folds its members left to right in ascending client id and then
// divides by the member count.

#include <cstddef>
#include <span>
#include <vector>

#include "fedpurin/param_vector.hpp"

namespace fedpurin::server {

/// What a client uploads: θ ⊙ m and m.
struct ClientUpdate {
  std::size_t client_id = 0;
  ParamVector sparse_params;
  Mask mask;
};

ClientUpdate make_update(std::size_t client_id, const ParamVector& theta, const Mask& mask);

/// Symmetric matrix of pairwise mask overlaps. The diagonal is unused.
class OverlapMatrix {
 public:
  explicit OverlapMatrix(std::size_t clients) : n_(clients), o_(clients * clients, 1.0) {}

  std::size_t clients() const noexcept { return n_; }
  double at(std::size_t i, std::size_t j) const { return o_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) {
    o_[i * n_ + j] = v;
    o_[j * n_ + i] = v;
  }
  /// Mean over ordered pairs i != j.
  double average() const;
  /// Max over i != j.
  double maximum() const;

 private:
  std::size_t n_;
  std::vector<double> o_;
};

/// 1 - hamming(a, b) / (popcount(a) + popcount(b)); 1 when both are empty.
double overlap(const Mask& a, const Mask& b);
OverlapMatrix overlap_matrix(std::span<const Mask> masks);

/// avg + (round / beta) * (max - avg), via std::lerp so both endpoints are
/// exact. Requires at least two clients and beta >= 1.
double threshold(std::size_t round, const OverlapMatrix& o, std::size_t beta);

struct CollabPlan {
  double threshold = 0.0;
  /// sets[i] lists partners of client i in ascending order, never i itself.
  std::vector<std::vector<std::size_t>> sets;
};

/// C_i = { j != i : o(i, j) >= threshold }.
CollabPlan plan_collaboration(const OverlapMatrix& o, double threshold);

/// Scheduled plan for `round`. Past beta every set is empty; a single
/// client has nobody to collaborate with.
CollabPlan plan_for_round(std::size_t round, const OverlapMatrix& o, std::size_t beta);

/// Mean of models[m] over the members (sorted ascending by the caller).
ParamVector group_mean(std::span<const ParamVector> models, std::span<const std::size_t> members);

/// δ_i: mean of the masked uploads of client i and its collaboration set.
ParamVector grouped_model(std::span<const ClientUpdate> updates, const CollabPlan& plan, std::size_t client);

/// θ̄: mean of all masked uploads; zero wherever no client selected.
ParamVector global_model(std::span<const ClientUpdate> updates);

/// δ_i where the mask is set, θ̄ elsewhere.
ParamVector combine(const ParamVector& delta, const ParamVector& global, const Mask& mask);

}  // namespace fedpurin::server
