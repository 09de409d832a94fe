#include "fedpurin/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedpurin/errors.hpp"
#include "fedpurin/kernels.hpp"

namespace fedpurin::saliency {

void ScoreConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau out of (0,1]: " + std::to_string(tau));
  if (!(cutoff >= 0.0) || !std::isfinite(cutoff)) {
    throw ConfigError("cutoff must be a finite value >= 0: " + std::to_string(cutoff));
  }
}

SaliencyScores score(std::span<const double> theta, std::span<const double> grad, bool include_hessian) {
  SaliencyScores s{std::vector<double>(theta.size())};
  kernels::perturbation_scores(theta, grad, include_hessian, s.values);
  for (std::size_t j = 0; j < s.values.size(); ++j) {
    if (!std::isfinite(s.values[j])) throw NumericError("non-finite score at parameter " + std::to_string(j));
  }
  return s;
}

SaliencyScores score(const ParamVector& theta, const nn::GradientSnapshot& snapshot, const ScoreConfig& cfg) {
  const auto& g =
      cfg.gradient_source == GradientSource::exact_grad ? snapshot.exact_grad : snapshot.delta_theta;
  if (g.size() != theta.size()) {
    throw ConfigError("gradient snapshot has " + std::to_string(g.size()) + " entries for " +
                      std::to_string(theta.size()) + " parameters");
  }
  return score(theta.values, g, cfg.include_hessian_term);
}

double flip_perturbation(double theta, double grad, bool previous_bit, bool include_hessian) {
  const double sign = previous_bit ? -1.0 : 1.0;  // 1 - 2m
  const double p = grad * theta;
  const double first = p * sign;
  return include_hessian ? std::fabs(first + 0.5 * p * p * (sign * sign)) : std::fabs(first);
}

std::size_t selection_count(std::size_t length, double tau) {
  if (length == 0) return 0;
  const double x = tau * static_cast<double>(length);
  // Absorb rounding noise such as 0.3 * 10 = 3.0000000000000004.
  auto k = static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
  return std::clamp<std::size_t>(k, 1, length);
}

namespace {

template <typename OnDropped>
Mask select_top(const SaliencyScores& scores, const ScoreConfig& cfg, const Layout& layout, OnDropped dropped) {
  cfg.validate();
  const std::size_t d = validate_layout(layout);
  if (scores.values.size() != d) {
    throw ConfigError("scores have " + std::to_string(scores.values.size()) + " entries, layout covers " +
                      std::to_string(d));
  }
  Mask mask(d);
  std::vector<std::size_t> idx;
  for (const auto& r : layout) {
    idx.resize(r.length);
    std::iota(idx.begin(), idx.end(), r.offset);
    const std::size_t k = selection_count(r.length, cfg.tau);
    const auto higher = [&](std::size_t a, std::size_t b) {
      const double sa = scores.values[a], sb = scores.values[b];
      return sa > sb || (sa == sb && a < b);
    };
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), higher);
    for (std::size_t q = 0; q < k; ++q) {
      const std::size_t j = idx[q];
      if (scores.values[j] < cfg.cutoff) {
        dropped();
      } else {
        mask.set(j);
      }
    }
  }
  return mask;
}

}  // namespace

Mask build_mask(const SaliencyScores& scores, const ScoreConfig& cfg, const Layout& layout) {
  return select_top(scores, cfg, layout, [] {});
}

std::size_t cutoff_removals(const SaliencyScores& scores, const ScoreConfig& cfg, const Layout& layout) {
  std::size_t n = 0;
  select_top(scores, cfg, layout, [&] { ++n; });
  return n;
}

}  // namespace fedpurin::saliency
