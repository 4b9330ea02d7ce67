#pragma once

#include "tsc/solver.hpp"
#include "tsc/sparsity.hpp"

#include <iosfwd>
#include <vector>

namespace tsc {

/// One complete optimal control instance.
struct Problem {
    Model model;
    GridSpec grid;
    TimeGrid time;
    StateTriple init;
    Targets targets;
    BoxBounds bounds;
    SparsityMode mode = SparsityMode::None;

    ControlPair zero_control() const { return ControlPair::zeros(grid, time); }
};

struct CostBreakdown {
    double tracking_q = 0.0;      // beta1/2 |phi - phi_Q|^2
    double tracking_final = 0.0;  // beta2/2 |phi(T) - phi_Omega|^2
    double control = 0.0;         // nu/2 |u|^2
    double sparsity = 0.0;        // kappa g(u)

    double smooth() const noexcept { return tracking_q + tracking_final + control; }
    double total() const noexcept { return smooth() + sparsity; }
};

CostBreakdown cost_of(const Problem& problem, const Trajectory& state, const ControlPair& u);
CostBreakdown reduced_cost(const Problem& problem, const ControlPair& u);

struct GradientEval {
    Trajectory state;
    AdjointTriple adjoint;
    ControlPair d;         // (-psi1 h(phi), psi3)
    ControlPair gradient;  // d + nu u
    CostBreakdown cost;
};

/// One forward and one adjoint solve.
GradientEval smooth_gradient(const Problem& problem, const ControlPair& u);

/// |u - P_box(-(d + kappa lambda)/nu)| with lambda from select_subgradient.
double vi_residual(const Problem& problem, const ControlPair& u, const ControlPair& d);
double vi_residual(const Problem& problem, const ControlPair& u);

/// Measure of the slices whose mode norm exceeds tol (the number of nonzero points times tau vol for FullQ).
double support_measure(SparsityMode mode, const SpaceTimeField& u, double tol = 0.0);

struct OptimizeOptions {
    int max_iters = 500;
    double initial_step = 0.0;  // 0 selects 1/nu
    double backtrack = 0.5;
    double sufficient_decrease = 1e-4;
    double vi_tolerance = 1e-8;
    double cost_tolerance = 0.0;  // relative decrease below which the run stops; 0 disables
    double min_step = 1e-14;

    void validate() const;
    bool operator==(const OptimizeOptions&) const = default;
};

struct IterationRecord {
    int iter = 0;
    double cost = 0.0;
    double vi_residual = 0.0;
    double step = 0.0;
    double support1 = 0.0;
    double support2 = 0.0;
};

struct OptimizeResult {
    ControlPair control;
    Trajectory state;
    AdjointTriple adjoint;
    ControlPair d;
    SubgradientPair lambda;
    CostBreakdown cost;
    double vi_residual = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<IterationRecord> history;
};

/// Proximal gradient on J1 + kappa g + box indicator with backtracking on the reduced cost.
/// u0 is projected onto the box first. Cost changes below 1e-13 relative count as roundoff in the
/// decrease test, so accepted costs are nonincreasing up to that resolution. Throws StepsizeCollapse.
OptimizeResult proximal_gradient_solve(const Problem& problem, const ControlPair& u0,
                                       const OptimizeOptions& options = {});

struct ThresholdReport {
    double kappa0 = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    std::vector<double> norms1, norms2;  // mode norms of d at u = 0
};

/// Smallest kappa for which u = 0 satisfies the VI: the largest mode norm of d at u = 0.
ThresholdReport zero_control_threshold(const Problem& problem);

struct SweepRow {
    double kappa = 0.0;
    double support1 = 0.0;
    double support2 = 0.0;
    double cost = 0.0;
    double vi_residual = 0.0;
    double control_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Optimizes for every kappa in the ascending list; kappa = 0 switches g off.
std::vector<SweepRow> kappa_sweep(const Problem& problem, const std::vector<double>& kappas, const ControlPair& u0,
                                  const OptimizeOptions& options = {}, double support_tol = 1e-8);

void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
void write_threshold_csv(std::ostream& os, const ThresholdReport& report, SparsityMode mode);

} // namespace tsc
