#pragma once

#include <span>
#include <vector>

#include "fedpurin/nn.hpp"
#include "fedpurin/param_vector.hpp"

namespace fedpurin::saliency {

enum class GradientSource { exact_grad, delta_theta };

struct ScoreConfig {
  GradientSource gradient_source = GradientSource::exact_grad;
  bool include_hessian_term = false;
  double tau = 0.5;
  /// Selected entries scoring below this are dropped.
  double cutoff = 1e-10;

  /// Throws ConfigError unless 0 < tau <= 1 and cutoff >= 0.
  void validate() const;
  bool operator==(const ScoreConfig&) const = default;
};

/// Nonnegative, finite, one entry per parameter.
struct SaliencyScores {
  std::vector<double> values;
};

/// Loss change estimate for zeroing each parameter, using the gradient
/// chosen by `cfg.gradient_source`.
SaliencyScores score(const ParamVector& theta, const nn::GradientSnapshot& snapshot,
                     const ScoreConfig& cfg);
SaliencyScores score(std::span<const double> theta, std::span<const double> grad, bool include_hessian);

/// Perturbation of flipping one mask entry away from `previous_bit`. Equals
/// the per-element score when previous_bit is set.
double flip_perturbation(double theta, double grad, bool previous_bit, bool include_hessian);

/// ceil(tau * length), at least 1 for a nonempty layer.
std::size_t selection_count(std::size_t length, double tau);

/// Per layer, sets the selection_count() highest-scoring entries (ties go
/// to the lower index), then clears any of those scoring below the cutoff.
Mask build_mask(const SaliencyScores& scores, const ScoreConfig& cfg, const Layout& layout);

/// Number of bits build_mask() cleared because of the cutoff.
std::size_t cutoff_removals(const SaliencyScores& scores, const ScoreConfig& cfg, const Layout& layout);

}  // namespace fedpurin::saliency
