#include "linear_solve.hpp"

#include "tsc/errors.hpp"

#include <cmath>
#include <vector>

namespace tsc::detail {

namespace {

void apply(const GridSpec& grid, std::span<const double> shift, std::span<const double> x, std::span<double> out)
{
    apply_laplacian(grid, x, out);
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = shift[i] * x[i] - out[i];
    }
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

} // namespace

CgStats solve_shifted(const GridSpec& grid, std::span<const double> shift, std::span<const double> rhs,
                      std::span<double> x, double rtol)
{
    const std::size_t n = x.size();
    std::vector<double> r(n), z(n), p(n), ap(n), inv_diag(n);

    // Diagonal of -Lap_h per cell, for the Jacobi preconditioner.
    {
        const double hx2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
        const double hy2 = grid.dim == 2 ? 1.0 / (grid.spacing(1) * grid.spacing(1)) : 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            const int i = static_cast<int>(c) % grid.n[0];
            const int j = static_cast<int>(c) / grid.n[0];
            double d = 0.0;
            if (i > 0) d += hx2;
            if (i < grid.n[0] - 1) d += hx2;
            if (grid.dim == 2) {
                if (j > 0) d += hy2;
                if (j < grid.n[1] - 1) d += hy2;
            }
            if (!(shift[c] > 0.0)) {
                throw InvalidArgument("shifted Laplacian solve needs a positive shift");
            }
            inv_diag[c] = 1.0 / (shift[c] + d);
        }
    }

    const double bnorm = std::sqrt(dot(rhs, rhs));
    CgStats stats;
    if (bnorm == 0.0) {
        for (double& v : x) {
            v = 0.0;
        }
        return stats;
    }

    apply(grid, shift, x, ap);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = rhs[i] - ap[i];
        z[i] = inv_diag[i] * r[i];
        p[i] = z[i];
    }
    double rz = dot(r, z);
    double rnorm = std::sqrt(dot(r, r));
    const int max_iter = 10 * static_cast<int>(n) + 100;
    int it = 0;
    while (rnorm > rtol * bnorm && it < max_iter) {
        apply(grid, shift, p, ap);
        const double alpha = rz / dot(p, ap);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = std::sqrt(dot(r, r));
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = inv_diag[i] * r[i];
        }
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (std::size_t i = 0; i < n; ++i) {
            p[i] = z[i] + beta * p[i];
        }
        ++it;
    }
    // Stagnation slightly above rtol is round-off limited and accepted.
    if (!(rnorm <= 1e3 * rtol * bnorm)) {
        throw Error("conjugate gradients did not reach the requested tolerance");
    }

    // Sum of the residual is sum(b) - sum(shift * x) since Lap_h sums to zero.
    apply(grid, shift, x, ap);
    double rsum = 0.0;
    double dsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        rsum += rhs[i] - ap[i];
        dsum += shift[i];
    }
    const double c = rsum / dsum;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] += c;
    }

    stats.iterations = it;
    stats.relative_residual = rnorm / bnorm;
    return stats;
}

} // namespace tsc::detail
