#pragma once

#include "tsc/fields.hpp"
#include "tsc/model.hpp"
#include "tsc/solver.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsc {

/// g_Q = L1 over space-time, g_T = integral in time of spatial L2 norms,
/// g_Omega = integral in space of temporal L2 norms.
enum class SparsityMode { None, FullQ, TimeT, SpaceOmega };

std::string_view to_string(SparsityMode mode) noexcept;
/// Accepts "none", "full", "time", "space" (and the enum spellings). Throws InvalidArgument.
SparsityMode parse_sparsity_mode(std::string_view name);

/// Lambda pair, stored like a control.
using SubgradientPair = ControlPair;

/// How a mode partitions a control into slices: slice s holds entries index(s, 0..length-1),
/// each carrying quadrature weight `weight` inside the slice norm.
struct SliceLayout {
    SparsityMode mode = SparsityMode::None;
    int count = 0;
    int length = 0;
    double weight = 0.0;   // weight inside a slice norm
    double measure = 0.0;  // weight of a slice in the outer integral
    int cells = 0;

    static SliceLayout of(SparsityMode mode, const GridSpec& grid, const TimeGrid& time);
    int index(int slice, int j) const noexcept;
};

/// Mode norm of every slice: |u| per point, spatial norms per step, or temporal norms per cell.
std::vector<double> mode_norms(SparsityMode mode, const SpaceTimeField& u);

double eval_g(SparsityMode mode, const SpaceTimeField& u);
double eval_g(SparsityMode mode, const ControlPair& u);

double project_box(double s, double lo, double hi);
Field project_box(Field f, double lo, double hi);
SpaceTimeField project_box(SpaceTimeField u, const BoxBounds& bounds, int control);
ControlPair project_box(ControlPair u, const BoxBounds& bounds);

/// argmin over [lo, hi] of (u - v)^2 / 2 + t |u|.
double prox_scalar(double v, double lo, double hi, double t);

/// argmin over the box of (w / 2 eta) |u - v|^2 + kappa sqrt(w) |u| with t = eta kappa.
/// Solves theta = ||P_box(v theta / (theta + t))||_w by bisection; throws BisectionFailure.
void prox_group(std::span<const double> v, std::span<const double> lo, std::span<const double> hi, double weight,
                double t, std::span<double> out);

/// Prox of eta (kappa g + box indicator) on one control. Sparsity modes need lo < 0 < hi (BadBounds).
SpaceTimeField prox(SparsityMode mode, const SpaceTimeField& v, double eta, double kappa, const BoxBounds& bounds,
                    int control);
ControlPair prox(SparsityMode mode, const ControlPair& v, double eta, double kappa, const BoxBounds& bounds);

/// Element of the subdifferential of g at u. On zero slices it is the projection of -d/kappa onto
/// the unit ball, which minimizes the VI residual.
SubgradientPair select_subgradient(SparsityMode mode, const ControlPair& u, const ControlPair& d, double kappa);

struct CertificateReport {
    SparsityMode mode = SparsityMode::None;
    double kappa = 0.0;
    ControlPair d;
    std::vector<double> norms1, norms2;
    std::vector<char> flagged1, flagged2;  // slices where any local minimizer must vanish

    int flagged_count(int control) const noexcept;
};

/// Flags the slices where the mode norm of d is at most kappa. Needs constant bounds with
/// lo < 0 < hi (BoundsNotSigned).
CertificateReport certificate(SparsityMode mode, const ControlPair& d, const BoxBounds& bounds, double kappa);
CertificateReport certificate(SparsityMode mode, const Model& model, const AdjointTriple& adjoint,
                              const Trajectory& base, const BoxBounds& bounds, double kappa);

/// Columns: slice, coordinates of the slice, norm_d1, norm_d2, flag1, flag2, kappa.
void write_certificate_csv(std::ostream& os, const CertificateReport& report);

} // namespace tsc
