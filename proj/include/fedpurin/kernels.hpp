#pragma once

// Elementwise kernels over the flat parameter vector, in a serial form and an
// OpenMP form. Both visit clients in ascending order for every element, so the
// two variants agree bitwise; the serial one is kept for tests and the
// benchmark.

#include <span>

#include "fedpurin/param_vector.hpp"

namespace fedpurin::kernels {

enum class Exec { serial, parallel };

/// out[j] = |-(g·θ)_j + ½ (g·θ)_j²| with the Hessian term, |(g·θ)_j| without.
void perturbation_scores(std::span<const double> theta, std::span<const double> grad,
                         bool include_hessian, std::span<double> out, Exec exec = Exec::parallel);

/// out[j] = (rows[0][j] + rows[1][j] + ... ) / rows.size(), left fold.
/// All rows must have out.size() elements.
void mean_rows(std::span<const double* const> rows, std::span<double> out, Exec exec = Exec::parallel);

/// out[j] = mask[j] ? on[j] : off[j].
void select(const Mask& mask, std::span<const double> on, std::span<const double> off,
            std::span<double> out, Exec exec = Exec::parallel);

}  // namespace fedpurin::kernels
