#include "tsc/verify.hpp"

#include "tsc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

namespace tsc {

bool Measurement::ok() const noexcept
{
    switch (bound) {
    case Bound::AtMost: return value <= tolerance;
    case Bound::AtLeast: return value >= tolerance;
    case Bound::Info: return true;
    }
    return false;
}

void CheckReport::at_most(std::string what, double value, double tol)
{
    measurements.push_back({std::move(what), value, tol, Measurement::Bound::AtMost});
}

void CheckReport::at_least(std::string what, double value, double tol)
{
    measurements.push_back({std::move(what), value, tol, Measurement::Bound::AtLeast});
}

void CheckReport::info(std::string what, double value)
{
    measurements.push_back({std::move(what), value, 0.0, Measurement::Bound::Info});
}

bool CheckReport::passed() const noexcept
{
    if (!applicable) {
        return true;
    }
    return std::all_of(measurements.begin(), measurements.end(), [](const Measurement& m) { return m.ok(); });
}

void write_check_csv(std::ostream& os, const CheckReport& r)
{
    os << "check,measurement,value,bound,tolerance,ok\n";
    if (!r.applicable) {
        os << r.name << ",applicable,0,info,0,1\n";
    }
    for (const auto& m : r.measurements) {
        const char* b = m.bound == Measurement::Bound::AtMost ? "at_most"
                        : m.bound == Measurement::Bound::AtLeast ? "at_least"
                                                                 : "info";
        os << r.name << ',' << m.name << ',' << format_real(m.value) << ',' << b << ','
           << format_real(m.tolerance) << ',' << (m.ok() ? 1 : 0) << '\n';
    }
}

void write_table_csv(std::ostream& os, const CheckReport& r)
{
    for (std::size_t i = 0; i < r.columns.size(); ++i) {
        os << (i ? "," : "") << r.columns[i];
    }
    os << '\n';
    for (const auto& row : r.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            os << (i ? "," : "") << format_real(row[i]);
        }
        os << '\n';
    }
}

double fitted_order(const std::vector<double>& x, const std::vector<double>& err)
{
    if (x.size() != err.size() || x.size() < 2) {
        throw InvalidArgument("fitted_order needs at least two matching points");
    }
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(err[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::vector<double> default_eps_ladder() { return {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7}; }

namespace {

double smooth_cost(const Problem& problem, const ControlPair& u)
{
    return cost_of(problem, solve_state(problem.model, u, problem.init), u).smooth();
}

ControlPair random_direction(const Problem& problem, std::mt19937_64& rng)
{
    std::normal_distribution<double> dist;
    auto k = problem.zero_control();
    for (int c = 0; c < 2; ++c) {
        for (auto& v : k[c].values()) v = dist(rng);
    }
    k *= 1.0 / k.max_abs();
    return k;
}

double triple_norm(const Trajectory& t)
{
    return std::sqrt(inner(t.mu, t.mu) + inner(t.phi, t.phi) + inner(t.sigma, t.sigma));
}

} // namespace

CheckReport fd_gradient_check(const Problem& problem, const ControlPair& u, int n_directions,
                              const std::vector<double>& eps_ladder, std::uint64_t seed, double tolerance)
{
    CheckReport r;
    r.name = "fd_gradient";
    r.columns = {"direction", "eps", "directional_derivative", "central_difference", "relative_error"};
    const auto g = smooth_gradient(problem, u);
    std::mt19937_64 rng(seed);
    for (int dir = 0; dir < n_directions; ++dir) {
        const auto k = random_direction(problem, rng);
        const double gk = inner(g.gradient, k);
        double best = std::numeric_limits<double>::infinity();
        std::vector<double> errs;
        for (double eps : eps_ladder) {
            double fd;
            try {
                fd = (smooth_cost(problem, u + eps * k) - smooth_cost(problem, u - eps * k)) / (2 * eps);
            } catch (const Error&) {
                continue;
            }
            const double scale = std::max(std::abs(gk), std::abs(fd));
            const double err = scale <= 1e-10 ? 0.0 : std::abs(fd - gk) / scale;
            best = std::min(best, err);
            errs.push_back(err);
            r.rows.push_back({double(dir), eps, gk, fd, err});
        }
        r.at_most("best relative error, direction " + std::to_string(dir), best, tolerance);
        if (dir == 0 && errs.size() >= 2 && errs[0] > 0.0 && errs[1] > 0.0) {
            r.info("eps slope, direction 0", std::log(errs[0] / errs[1]) / std::log(eps_ladder[0] / eps_ladder[1]));
        }
    }
    return r;
}

CheckReport linearized_fd_check(const Problem& problem, const ControlPair& u, const ControlPair& k,
                                const std::vector<double>& eps_ladder, double tolerance)
{
    CheckReport r;
    r.name = "linearized_fd";
    r.columns = {"eps", "relative_error"};
    const auto base = solve_state(problem.model, u, problem.init);
    const auto lin = solve_linearized(problem.model, base, u, LinearizedSpec::derivative(k));
    const double lin_norm = triple_norm(lin);
    double best = std::numeric_limits<double>::infinity();
    for (double eps : eps_ladder) {
        Trajectory up, dn;
        try {
            up = solve_state(problem.model, u + eps * k, problem.init);
            dn = solve_state(problem.model, u - eps * k, problem.init);
        } catch (const Error&) {
            continue;
        }
        const double s = 1.0 / (2 * eps);
        const Trajectory diff{s * (up.mu - dn.mu) - lin.mu, s * (up.phi - dn.phi) - lin.phi,
                              s * (up.sigma - dn.sigma) - lin.sigma};
        const Trajectory fd{s * (up.mu - dn.mu), s * (up.phi - dn.phi), s * (up.sigma - dn.sigma)};
        const double scale = std::max(triple_norm(fd), lin_norm);
        const double err = scale == 0.0 ? 0.0 : triple_norm(diff) / scale;
        best = std::min(best, err);
        r.rows.push_back({eps, err});
    }
    r.at_most("best relative error", best, tolerance);
    return r;
}

double relative_duality_gap(const Problem& problem, const ControlPair& u, const ControlPair& k)
{
    const auto& p = problem.model.params;
    const auto g = smooth_gradient(problem, u);
    const auto lin = solve_linearized(problem.model, g.state, u, LinearizedSpec::derivative(k));
    const int last = g.state.phi.slices() - 1;
    double a = 0.0;
    double b = 0.0;
    if (p.beta1 != 0.0) {
        a = p.beta1 * inner(g.state.phi - problem.targets.phi_q, lin.phi);
    }
    if (p.beta2 != 0.0) {
        b = p.beta2 * inner(g.state.phi.snapshot(last) - problem.targets.phi_omega, lin.phi.snapshot(last));
    }
    const double c = inner(g.d, k);
    const double scale = std::abs(a) + std::abs(b) + std::abs(c);
    return scale == 0.0 ? 0.0 : std::abs(a + b - c) / scale;
}

CheckReport duality_gap(const Problem& problem, const ControlPair& u, const ControlPair& k, double tolerance)
{
    CheckReport r;
    r.name = "duality_gap";
    r.at_most("relative gap", relative_duality_gap(problem, u, k), tolerance);
    return r;
}

CheckReport duality_gap_refinement(const InstanceFactory& factory, int levels, double min_order)
{
    if (levels < 3) {
        throw InvalidArgument("refinement studies need at least 3 levels");
    }
    CheckReport r;
    r.name = "duality_gap_refinement";
    r.columns = {"h", "tau", "relative_gap", "order"};
    std::vector<double> taus, gaps;
    for (int l = 0; l < levels; ++l) {
        const auto inst = factory(l);
        const double gap = relative_duality_gap(inst.problem, inst.u, inst.k);
        const double h = inst.problem.grid.spacing(0);
        const double tau = inst.problem.time.tau();
        const double order = gaps.empty() ? 0.0 : std::log(gaps.back() / gap) / std::log(taus.back() / tau);
        taus.push_back(tau);
        gaps.push_back(gap);
        r.rows.push_back({h, tau, gap, order});
    }
    r.observed_order = fitted_order(taus, gaps);
    for (std::size_t i = 1; i < gaps.size(); ++i) {
        r.at_most("gap ratio level " + std::to_string(i), gaps[i] / gaps[i - 1], 1.0);
    }
    r.at_least("observed order in tau", r.observed_order, min_order);
    return r;
}

CheckReport linearized_refinement(const InstanceFactory& factory, double tolerance)
{
    CheckReport r;
    r.name = "linearized_refinement";
    r.columns = {"h", "tau", "relative_error"};
    std::vector<double> errs;
    for (int l = 0; l < 2; ++l) {
        const auto inst = factory(l);
        const auto c = linearized_fd_check(inst.problem, inst.u, inst.k, default_eps_ladder(), tolerance);
        const double e = c.measurements.front().value;
        errs.push_back(e);
        r.rows.push_back({inst.problem.grid.spacing(0), inst.problem.time.tau(), e});
    }
    r.at_most("relative error, base level", errs[0], tolerance);
    r.at_most("error ratio after refinement", errs[1] / errs[0], 1.0);
    return r;
}

BruteForceResult brute_force_optimize(const Problem& problem, const BruteForceOptions& opt)
{
    const auto zero = problem.zero_control();
    const std::size_t per = zero.u1.values().size();
    const std::size_t dim = 2 * per;
    if (dim > 18) {
        throw DimensionTooLarge("brute force search supports at most 18 control entries, got " +
                                std::to_string(dim));
    }
    problem.bounds.validate(per);
    std::vector<double> lo(dim), hi(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        const int c = i < per ? 0 : 1;
        lo[i] = problem.bounds.lo(c, i % per);
        hi[i] = problem.bounds.hi(c, i % per);
    }

    BruteForceResult res;
    auto u = zero;
    auto eval = [&](const std::vector<double>& x) {
        for (std::size_t i = 0; i < per; ++i) {
            u.u1.values()[i] = x[i];
            u.u2.values()[i] = x[per + i];
        }
        ++res.evaluations;
        try {
            return reduced_cost(problem, u).total();
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    // Largest odd axis count within the budget.
    int p = std::max(1, opt.max_axis_points - (opt.max_axis_points % 2 == 0 ? 1 : 0));
    while (p > 1 && std::pow(double(p), double(dim)) > double(opt.lattice_budget)) {
        p -= 2;
    }
    res.axis_points = p;
    std::vector<std::vector<double>> axes(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        for (int j = 0; j < p; ++j) {
            axes[i].push_back(p == 1 ? 0.5 * (lo[i] + hi[i]) : lo[i] + (hi[i] - lo[i]) * j / (p - 1));
        }
        if (lo[i] <= 0.0 && 0.0 <= hi[i]) {
            auto it = std::min_element(axes[i].begin(), axes[i].end(),
                                       [](double a, double b) { return std::abs(a) < std::abs(b); });
            *it = 0.0;
        }
    }

    std::vector<double> x(dim), best_x(dim);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> idx(dim, 0);
    for (;;) {
        for (std::size_t i = 0; i < dim; ++i) x[i] = axes[i][idx[i]];
        const double f = eval(x);
        if (f < best) {
            best = f;
            best_x = x;
        }
        std::size_t i = 0;
        while (i < dim && ++idx[i] == p) {
            idx[i++] = 0;
        }
        if (i == dim) break;
    }

    // Pattern refinement on {-1, 0, 1}^dim around the incumbent.
    std::vector<double> step(dim);
    double width = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        step[i] = (hi[i] - lo[i]) / std::max(2, p - 1) / 2.0;
        width = std::max(width, hi[i] - lo[i]);
    }
    std::vector<int> off(dim);
    for (int round = 0; round < opt.max_rounds; ++round) {
        const double s_max = *std::max_element(step.begin(), step.end());
        if (s_max < opt.relative_spacing * width) break;
        std::fill(off.begin(), off.end(), -1);
        const auto center = best_x;
        bool moved = false;
        for (;;) {
            bool is_center = true;
            for (std::size_t i = 0; i < dim; ++i) {
                x[i] = std::clamp(center[i] + off[i] * step[i], lo[i], hi[i]);
                is_center = is_center && off[i] == 0;
            }
            if (!is_center) {
                const double f = eval(x);
                if (f < best) {
                    best = f;
                    best_x = x;
                    moved = true;
                }
            }
            std::size_t i = 0;
            while (i < dim && ++off[i] == 2) {
                off[i++] = -1;
            }
            if (i == dim) break;
        }
        if (!moved) {
            for (double& s : step) s *= 0.5;
        }
    }

    for (std::size_t i = 0; i < per; ++i) {
        u.u1.values()[i] = best_x[i];
        u.u2.values()[i] = best_x[per + i];
    }
    res.u = u;
    res.cost = best;
    return res;
}

CheckReport separation_monitor(const Trajectory& traj, const Potential& pot, double threshold)
{
    CheckReport r;
    r.name = "separation";
    if (!pot.singular()) {
        r.applicable = false;
        r.note = "not applicable: potential has no singular points";
        return r;
    }
    r.columns = {"step", "phi_min", "phi_max", "margin_low", "margin_high"};
    double worst = std::numeric_limits<double>::infinity();
    int worst_step = 0;
    int first_bad = -1;
    for (int k = 0; k < traj.phi.slices(); ++k) {
        auto s = traj.phi.slice(k);
        const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
        const double low = *mn - pot.r_minus();
        const double high = pot.r_plus() - *mx;
        r.rows.push_back({double(k), *mn, *mx, low, high});
        const double m = std::min(low, high);
        if (!(m > threshold) && first_bad < 0) {
            first_bad = k;
        }
        if (m < worst || std::isnan(m)) {
            worst = m;
            worst_step = k;
        }
    }
    r.at_least("minimum margin", worst, threshold);
    r.info("step of minimum margin", worst_step);
    if (first_bad >= 0) {
        r.info("first offending step", first_bad);
        r.note = "margin at or below threshold first at step " + std::to_string(first_bad);
    }
    return r;
}

} // namespace tsc
