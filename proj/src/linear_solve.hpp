#pragma once

// Internal: SPD solves with the shifted Neumann Laplacian diag(D) - Lap_h.

#include "tsc/fields.hpp"

#include <span>

namespace tsc::detail {

struct CgStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Solves (diag(shift) - Lap_h) x = rhs by Jacobi-preconditioned conjugate gradients.
/// `x` carries the initial guess. Every shift entry must be positive. After convergence the
/// constant mode is corrected so that the volume-weighted residual sums to zero, which keeps the
/// integrated balance laws exact up to round-off.
CgStats solve_shifted(const GridSpec& grid, std::span<const double> shift, std::span<const double> rhs,
                      std::span<double> x, double rtol);

} // namespace tsc::detail
