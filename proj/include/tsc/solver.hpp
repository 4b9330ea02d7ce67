#pragma once

#include "tsc/fields.hpp"
#include "tsc/model.hpp"

#include <vector>

namespace tsc {

struct SolverOptions {
    double cg_tolerance = 1e-12;
    double newton_tolerance = 1e-12;
    int newton_max_iterations = 50;
    int max_step_halvings = 40;

    bool operator==(const SolverOptions&) const = default;
};

/// Everything that defines the PDE system apart from data and controls.
struct Model {
    ModelParams params;
    Potential potential = Potential::regular();
    Interpolant interp = Interpolant::smoothstep7();
    SolverOptions solver;
};

/// Cytotoxic drug u1 and nutrient/medication u2, piecewise constant on (t_n, t_{n+1}].
struct ControlPair {
    SpaceTimeField u1;
    SpaceTimeField u2;

    static ControlPair zeros(const GridSpec& grid, const TimeGrid& time);

    const SpaceTimeField& operator[](int i) const noexcept { return i == 0 ? u1 : u2; }
    SpaceTimeField& operator[](int i) noexcept { return i == 0 ? u1 : u2; }

    bool same_shape(const ControlPair& other) const noexcept;
    bool admissible(const BoxBounds& bounds, double slack = 0.0) const;
    double max_abs() const noexcept;

    ControlPair& operator+=(const ControlPair& o);
    ControlPair& operator-=(const ControlPair& o);
    ControlPair& operator*=(double s) noexcept;
};

ControlPair operator+(ControlPair a, const ControlPair& b);
ControlPair operator-(ControlPair a, const ControlPair& b);
ControlPair operator*(double s, ControlPair a);
double inner(const ControlPair& a, const ControlPair& b);
double norm(const ControlPair& a);

struct Targets {
    SpaceTimeField phi_q;  // node layout
    Field phi_omega;
};

/// Data of the switched linear system: lam1 toggles the frozen-coefficient couplings, lam2 the
/// control direction, lam3 the sources and lam4 the initial data.
struct LinearizedSpec {
    bool lam1 = true;
    bool lam2 = true;
    bool lam3 = false;
    bool lam4 = false;
    ControlPair direction;
    SpaceTimeField f1, f2, f3;  // node layout; may be left empty when lam3 is off
    StateTriple init;           // may be left empty when lam4 is off

    /// Configuration whose solution is the derivative of the control-to-state map along k.
    static LinearizedSpec derivative(ControlPair k);
};

struct AdjointTriple {
    SpaceTimeField psi1;
    SpaceTimeField psi2;
    SpaceTimeField psi3;
};

struct StateDiagnostics {
    int newton_iterations = 0;
    int max_newton_iterations = 0;
    int cg_iterations = 0;
    /// Smallest distance of any phi value to r- or r+ (infinite for regular potentials).
    double min_margin = 0.0;
    int min_margin_step = 0;
};

/// Semi-implicit Euler for the state system. Per step: phi by damped Newton with F1' implicit
/// and F2' explicit, then mu with the explicit source (P sigma^n - A - u1^n) h(phi^n), then sigma
/// with its linear reaction terms implicit. Throws NewtonDivergence or SeparationLoss.
Trajectory solve_state(const Model& model, const ControlPair& controls, const StateTriple& init,
                       StateDiagnostics* diagnostics = nullptr);

/// Switched linear system with coefficients frozen on `base`.
Trajectory solve_linearized(const Model& model, const Trajectory& base, const ControlPair& base_controls,
                            const LinearizedSpec& spec);

/// Backward adjoint system with psi1(T) = psi3(T) = 0 and beta psi2(T) = beta2 (phi(T) - phi_Omega).
/// The sweep is the adjoint of the discrete forward scheme, so control_sensitivity gives the exact
/// gradient of the discrete cost; only the stored final psi2 node shows the continuous terminal value.
AdjointTriple solve_adjoint(const Model& model, const Trajectory& base, const ControlPair& base_controls,
                            const Targets& targets);

/// d = (-psi1 h(phi), psi3) on the control intervals; interval n pairs with psi^{n+1} and phi^n.
ControlPair control_sensitivity(const Model& model, const AdjointTriple& adjoint, const Trajectory& base);

struct BalanceRow {
    int step = 0;
    double mass_residual = 0.0;      // alpha<dmu> + <dphi> - tau <(P sigma - A - u1) h(phi)>
    double mass_relative = 0.0;
    double nutrient_residual = 0.0;  // <dsigma> - tau <-chi Lap phi + B(sigma_s - sigma) - E sigma h + u2>
    double nutrient_relative = 0.0;
    double mean_sigma = 0.0;
};

/// Integrated (spatial mean) balance of the mu/phi pair and of sigma for every step.
std::vector<BalanceRow> state_balance_report(const Trajectory& traj, const ModelParams& params,
                                             const ControlPair& controls, const Interpolant& interp);

} // namespace tsc
