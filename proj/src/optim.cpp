#include "tsc/optim.hpp"

#include "tsc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace tsc {

namespace {
constexpr double kCostResolution = 1e-13;
}

CostBreakdown cost_of(const Problem& problem, const Trajectory& state, const ControlPair& u)
{
    const auto& p = problem.model.params;
    CostBreakdown c;
    if (p.beta1 != 0.0) {
        const auto mis = state.phi - problem.targets.phi_q;
        c.tracking_q = 0.5 * p.beta1 * inner(mis, mis);
    }
    if (p.beta2 != 0.0) {
        const auto mis = state.phi.snapshot(state.phi.slices() - 1) - problem.targets.phi_omega;
        c.tracking_final = 0.5 * p.beta2 * inner(mis, mis);
    }
    c.control = 0.5 * p.nu * inner(u, u);
    c.sparsity = p.kappa * eval_g(problem.mode, u);
    return c;
}

CostBreakdown reduced_cost(const Problem& problem, const ControlPair& u)
{
    return cost_of(problem, solve_state(problem.model, u, problem.init), u);
}

GradientEval smooth_gradient(const Problem& problem, const ControlPair& u)
{
    GradientEval g;
    g.state = solve_state(problem.model, u, problem.init);
    g.adjoint = solve_adjoint(problem.model, g.state, u, problem.targets);
    g.d = control_sensitivity(problem.model, g.adjoint, g.state);
    g.gradient = g.d + problem.model.params.nu * u;
    g.cost = cost_of(problem, g.state, u);
    return g;
}

double vi_residual(const Problem& problem, const ControlPair& u, const ControlPair& d)
{
    const auto& p = problem.model.params;
    auto target = d;
    if (problem.mode != SparsityMode::None) {
        target += p.kappa * select_subgradient(problem.mode, u, d, p.kappa);
    }
    target *= -1.0 / p.nu;
    return norm(u - project_box(std::move(target), problem.bounds));
}

double vi_residual(const Problem& problem, const ControlPair& u)
{
    return vi_residual(problem, u, smooth_gradient(problem, u).d);
}

double support_measure(SparsityMode mode, const SpaceTimeField& u, double tol)
{
    const auto m = mode == SparsityMode::None ? SparsityMode::FullQ : mode;
    const auto layout = SliceLayout::of(m, u.grid(), u.time());
    const auto norms = mode_norms(m, u);
    const auto count = std::count_if(norms.begin(), norms.end(), [&](double n) { return n > tol; });
    return layout.measure * static_cast<double>(count);
}

void OptimizeOptions::validate() const
{
    if (max_iters < 0 || !(initial_step >= 0.0) || !(backtrack > 0.0 && backtrack < 1.0) ||
        !(sufficient_decrease > 0.0) || !(vi_tolerance > 0.0) || !(cost_tolerance >= 0.0) || !(min_step > 0.0)) {
        throw InvalidArgument("invalid optimizer options");
    }
}

OptimizeResult proximal_gradient_solve(const Problem& problem, const ControlPair& u0, const OptimizeOptions& opt)
{
    opt.validate();
    const auto& p = problem.model.params;
    const double eta_max = opt.initial_step > 0.0 ? opt.initial_step : 1.0 / p.nu;
    const double kappa = problem.mode == SparsityMode::None ? 0.0 : p.kappa;

    OptimizeResult res;
    ControlPair u = project_box(u0, problem.bounds);
    GradientEval g = smooth_gradient(problem, u);
    double eta = eta_max;
    double last_step = 0.0;

    for (int it = 0;; ++it) {
        const double vi = vi_residual(problem, u, g.d);
        res.history.push_back({it, g.cost.total(), vi, last_step, support_measure(problem.mode, u.u1),
                               support_measure(problem.mode, u.u2)});
        res.iterations = it;
        if (vi <= opt.vi_tolerance) {
            res.converged = true;
            break;
        }
        if (it == opt.max_iters) {
            break;
        }

        eta = std::min(2.0 * eta, eta_max);
        const double current = g.cost.total();
        ControlPair cand;
        CostBreakdown cand_cost;
        double moved = 0.0;
        for (;;) {
            if (eta < opt.min_step) {
                throw StepsizeCollapse("backtracking step size fell below " + std::to_string(opt.min_step));
            }
            cand = prox(problem.mode, u - eta * g.gradient, eta, kappa, problem.bounds);
            const double dist = norm(cand - u);
            moved = dist;
            if (dist == 0.0) {
                break;
            }
            cand_cost = reduced_cost(problem, cand);
            const double wanted = opt.sufficient_decrease / eta * dist * dist;
            // Below the resolution of the cost the decrease test is noise; accept non-increase there.
            const double resolution = kCostResolution * std::max(1.0, std::abs(current));
            const bool ok = wanted > resolution ? cand_cost.total() <= current - wanted
                                                : cand_cost.total() <= current + resolution;
            if (ok) {
                break;
            }
            eta *= opt.backtrack;
        }
        last_step = eta;
        if (moved == 0.0) {
            // Fixed point of the prox-gradient map.
            res.converged = true;
            break;
        }
        u = std::move(cand);
        g = smooth_gradient(problem, u);
        const double drop = current - g.cost.total();
        if (opt.cost_tolerance > 0.0 && drop <= opt.cost_tolerance * std::max(1.0, std::abs(current))) {
            res.history.push_back({it + 1, g.cost.total(), vi_residual(problem, u, g.d), last_step,
                                   support_measure(problem.mode, u.u1), support_measure(problem.mode, u.u2)});
            res.iterations = it + 1;
            res.converged = res.history.back().vi_residual <= opt.vi_tolerance;
            break;
        }
    }

    res.vi_residual = res.history.back().vi_residual;
    res.cost = g.cost;
    res.lambda = problem.mode == SparsityMode::None ? ControlPair::zeros(problem.grid, problem.time)
                                                    : select_subgradient(problem.mode, u, g.d, p.kappa);
    res.control = std::move(u);
    res.state = std::move(g.state);
    res.adjoint = std::move(g.adjoint);
    res.d = std::move(g.d);
    return res;
}

ThresholdReport zero_control_threshold(const Problem& problem)
{
    if (problem.mode == SparsityMode::None) {
        throw InvalidArgument("zero_control_threshold needs a sparsity mode");
    }
    const auto g = smooth_gradient(problem, problem.zero_control());
    ThresholdReport r;
    r.norms1 = mode_norms(problem.mode, g.d.u1);
    r.norms2 = mode_norms(problem.mode, g.d.u2);
    for (double n : r.norms1) r.kappa1 = std::max(r.kappa1, n);
    for (double n : r.norms2) r.kappa2 = std::max(r.kappa2, n);
    r.kappa0 = std::max(r.kappa1, r.kappa2);
    return r;
}

std::vector<SweepRow> kappa_sweep(const Problem& problem, const std::vector<double>& kappas, const ControlPair& u0,
                                  const OptimizeOptions& options, double support_tol)
{
    if (!std::is_sorted(kappas.begin(), kappas.end())) {
        throw InvalidArgument("kappa_sweep: kappas must be ascending");
    }
    std::vector<SweepRow> rows;
    for (double kappa : kappas) {
        if (!(kappa >= 0.0)) {
            throw InvalidArgument("kappa_sweep: kappas must be nonnegative");
        }
        Problem pk = problem;
        if (kappa == 0.0) {
            pk.mode = SparsityMode::None;
        } else {
            pk.model.params.kappa = kappa;
        }
        const auto r = proximal_gradient_solve(pk, u0, options);
        SweepRow row;
        row.kappa = kappa;
        row.support1 = support_measure(problem.mode, r.control.u1, support_tol);
        row.support2 = support_measure(problem.mode, r.control.u2, support_tol);
        row.cost = r.cost.total();
        row.vi_residual = r.vi_residual;
        row.control_norm = norm(r.control);
        row.iterations = r.iterations;
        row.converged = r.converged;
        rows.push_back(row);
    }
    return rows;
}

void write_history_csv(std::ostream& os, const std::vector<IterationRecord>& history)
{
    os << "iter,cost,vi_residual,step,support1,support2\n";
    for (const auto& h : history) {
        os << h.iter << ',' << format_real(h.cost) << ',' << format_real(h.vi_residual) << ',' << format_real(h.step)
           << ',' << format_real(h.support1) << ',' << format_real(h.support2) << '\n';
    }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    os << "kappa,support1,support2,cost,vi_residual,control_norm,iterations,converged\n";
    for (const auto& r : rows) {
        os << format_real(r.kappa) << ',' << format_real(r.support1) << ',' << format_real(r.support2) << ','
           << format_real(r.cost) << ',' << format_real(r.vi_residual) << ',' << format_real(r.control_norm) << ','
           << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
    }
}

void write_threshold_csv(std::ostream& os, const ThresholdReport& r, SparsityMode mode)
{
    os << "mode,kappa0,kappa1,kappa2\n"
       << to_string(mode) << ',' << format_real(r.kappa0) << ',' << format_real(r.kappa1) << ','
       << format_real(r.kappa2) << '\n';
}

} // namespace tsc
