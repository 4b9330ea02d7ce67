#pragma once

#include "tsc/optim.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace tsc {

struct Measurement {
    enum class Bound { AtMost, AtLeast, Info };

    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    Bound bound = Bound::AtMost;

    bool ok() const noexcept;
};

struct CheckReport {
    std::string name;
    bool applicable = true;
    std::string note;
    std::vector<Measurement> measurements;
    std::vector<std::string> columns;  // optional table, e.g. a refinement study
    std::vector<std::vector<double>> rows;
    double observed_order = 0.0;

    void at_most(std::string what, double value, double tol);
    void at_least(std::string what, double value, double tol);
    void info(std::string what, double value);
    /// True iff every bounded measurement holds; inapplicable checks pass.
    bool passed() const noexcept;
};

void write_check_csv(std::ostream& os, const CheckReport& report);
void write_table_csv(std::ostream& os, const CheckReport& report);

/// Least-squares slope of log(err) against log(x).
double fitted_order(const std::vector<double>& x, const std::vector<double>& err);

std::vector<double> default_eps_ladder();

/// Compares <grad J1(u), k> with central differences of J1 along random unit directions.
/// Only solve_state and cost_of are used for the differences.
CheckReport fd_gradient_check(const Problem& problem, const ControlPair& u, int n_directions = 5,
                              const std::vector<double>& eps_ladder = default_eps_ladder(),
                              std::uint64_t seed = 1, double tolerance = 1e-3);

/// Space-time L2 relative error of the linearized state against central differences of S.
CheckReport linearized_fd_check(const Problem& problem, const ControlPair& u, const ControlPair& k,
                                const std::vector<double>& eps_ladder = default_eps_ladder(),
                                double tolerance = 1e-2);

/// Control, direction and problem at refinement level r (h and tau halved per level).
struct Instance {
    Problem problem;
    ControlPair u;
    ControlPair k;
};
using InstanceFactory = std::function<Instance(int level)>;

/// Relative mismatch between the tracking-side pairing with the linearized state and <d, k>.
double relative_duality_gap(const Problem& problem, const ControlPair& u, const ControlPair& k);
CheckReport duality_gap(const Problem& problem, const ControlPair& u, const ControlPair& k, double tolerance = 0.05);
/// Gap on `levels` refinements with a fitted order in tau.
CheckReport duality_gap_refinement(const InstanceFactory& factory, int levels = 3, double min_order = 1.0);
/// Linearized check on a base and refined instance: error within tolerance and decreasing.
CheckReport linearized_refinement(const InstanceFactory& factory, double tolerance = 1e-2);

struct BruteForceOptions {
    long lattice_budget = 2'000'000;  // global lattice points
    int max_axis_points = 11;
    double relative_spacing = 1e-9;   // refinement stops below this fraction of the box width
    int max_rounds = 10'000;
};

struct BruteForceResult {
    ControlPair u;
    double cost = 0.0;
    long evaluations = 0;
    int axis_points = 0;
};

/// Lattice search over the box using only reduced_cost: a global odd lattice containing 0, then
/// {-1,0,1}^n pattern rounds that re-center on the best point and halve the spacing when the center wins.
/// Throws DimensionTooLarge above 18 control entries.
BruteForceResult brute_force_optimize(const Problem& problem, const BruteForceOptions& options = {});

/// Per-snapshot min/max of phi and distance to r-, r+. Fails when a margin drops to `threshold` or below
/// and names the first such step; not applicable for potentials without singularities.
CheckReport separation_monitor(const Trajectory& traj, const Potential& potential, double threshold = 1e-6);

} // namespace tsc
