#include "fedpurin/kernels.hpp"

#include <cmath>
#include <cstdint>

#include "fedpurin/errors.hpp"

namespace fedpurin::kernels {

namespace {

inline double score_at(double theta, double grad, bool include_hessian) {
  const double p = grad * theta;
  return include_hessian ? std::fabs(-p + 0.5 * p * p) : std::fabs(-p);
}

inline double mean_at(std::span<const double* const> rows, std::size_t j, double count) {
  double s = rows[0][j];
  for (std::size_t k = 1; k < rows.size(); ++k) s += rows[k][j];
  return s / count;
}

}  // namespace

void perturbation_scores(std::span<const double> theta, std::span<const double> grad,
                         bool include_hessian, std::span<double> out, Exec exec) {
  if (theta.size() != grad.size() || theta.size() != out.size()) {
    throw ConfigError("score inputs are not aligned");
  }
  const auto n = static_cast<std::int64_t>(theta.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) out[j] = score_at(theta[j], grad[j], include_hessian);
  } else {
    for (std::int64_t j = 0; j < n; ++j) out[j] = score_at(theta[j], grad[j], include_hessian);
  }
}

void mean_rows(std::span<const double* const> rows, std::span<double> out, Exec exec) {
  if (rows.empty()) throw ConfigError("mean over zero rows");
  const auto n = static_cast<std::int64_t>(out.size());
  const double count = static_cast<double>(rows.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) out[j] = mean_at(rows, static_cast<std::size_t>(j), count);
  } else {
    for (std::int64_t j = 0; j < n; ++j) out[j] = mean_at(rows, static_cast<std::size_t>(j), count);
  }
}

void select(const Mask& mask, std::span<const double> on, std::span<const double> off,
            std::span<double> out, Exec exec) {
  if (mask.size() != out.size() || on.size() != out.size() || off.size() != out.size()) {
    throw ConfigError("select inputs are not aligned");
  }
  const auto n = static_cast<std::int64_t>(out.size());
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (std::int64_t j = 0; j < n; ++j) {
      const auto u = static_cast<std::size_t>(j);
      out[u] = mask.test(u) ? on[u] : off[u];
    }
  } else {
    for (std::int64_t j = 0; j < n; ++j) {
      const auto u = static_cast<std::size_t>(j);
      out[u] = mask.test(u) ? on[u] : off[u];
    }
  }
}

}  // namespace fedpurin::kernels
