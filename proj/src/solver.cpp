#include "tsc/solver.hpp"

#include "linear_solve.hpp"
#include "tsc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tsc {

ControlPair ControlPair::zeros(const GridSpec& grid, const TimeGrid& time)
{
    return {SpaceTimeField::intervals(grid, time), SpaceTimeField::intervals(grid, time)};
}

bool ControlPair::same_shape(const ControlPair& other) const noexcept
{
    return u1.same_shape(other.u1) && u2.same_shape(other.u2);
}

bool ControlPair::admissible(const BoxBounds& bounds, double slack) const
{
    for (int c = 0; c < 2; ++c) {
        auto v = (*this)[c].values();
        for (std::size_t e = 0; e < v.size(); ++e) {
            if (!(v[e] >= bounds.lo(c, e) - slack) || !(v[e] <= bounds.hi(c, e) + slack)) {
                return false;
            }
        }
    }
    return true;
}

double ControlPair::max_abs() const noexcept { return std::max(u1.max_abs(), u2.max_abs()); }

ControlPair& ControlPair::operator+=(const ControlPair& o)
{
    u1 += o.u1;
    u2 += o.u2;
    return *this;
}

ControlPair& ControlPair::operator-=(const ControlPair& o)
{
    u1 -= o.u1;
    u2 -= o.u2;
    return *this;
}

ControlPair& ControlPair::operator*=(double s) noexcept
{
    u1 *= s;
    u2 *= s;
    return *this;
}

ControlPair operator+(ControlPair a, const ControlPair& b) { return a += b; }
ControlPair operator-(ControlPair a, const ControlPair& b) { return a -= b; }
ControlPair operator*(double s, ControlPair a) { return a *= s; }
double inner(const ControlPair& a, const ControlPair& b) { return inner(a.u1, b.u1) + inner(a.u2, b.u2); }
double norm(const ControlPair& a) { return std::sqrt(inner(a, a)); }

LinearizedSpec LinearizedSpec::derivative(ControlPair k)
{
    LinearizedSpec s;
    s.lam1 = true;
    s.lam2 = true;
    s.lam3 = false;
    s.lam4 = false;
    s.direction = std::move(k);
    return s;
}

namespace {

double max_abs(std::span<const double> v)
{
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

void require_control_shape(const ControlPair& c, const GridSpec& grid, const TimeGrid& time, const char* what)
{
    for (int i = 0; i < 2; ++i) {
        const auto& u = c[i];
        if (u.layout() != TimeLayout::Intervals || !(u.grid() == grid) || !(u.time() == time)) {
            throw ShapeMismatch(std::string(what) + ": control shape does not match the state grids");
        }
    }
}

void require_node_shape(const SpaceTimeField& f, const GridSpec& grid, const TimeGrid& time, const char* what)
{
    if (f.layout() != TimeLayout::Nodes || !(f.grid() == grid) || !(f.time() == time)) {
        throw ShapeMismatch(std::string(what) + ": node field shape does not match");
    }
}

double min_margin(const Potential& pot, std::span<const double> phi)
{
    double m = std::numeric_limits<double>::infinity();
    for (double v : phi) {
        m = std::min(m, pot.boundary_distance(v));
    }
    return m;
}

class PhiNewton {
public:
    PhiNewton(const Model& model, const GridSpec& grid, double tau)
        : model_(model), grid_(grid), tau_(tau), n_(grid.cells()), lap_(n_), g_(n_), gc_(n_), shift_(n_),
          delta_(n_), cand_(n_), neg_g_(n_)
    {
    }

    /// Solves beta (phi - phi_old)/tau - Lap phi + F1'(phi) = rhs in place; returns iterations.
    int solve(std::span<const double> phi_old, std::span<const double> rhs, std::span<double> phi, int step,
              int& cg_iterations)
    {
        const auto& pot = model_.potential;
        const auto& opt = model_.solver;
        const double bt = model_.params.beta / tau_;
        const double scale = std::max({1.0, bt * max_abs(phi_old), max_abs(rhs)});
        const double tol = opt.newton_tolerance * scale;

        double res = residual(phi_old, rhs, phi, g_);
        for (int it = 0; it < opt.newton_max_iterations; ++it) {
            if (res <= tol) {
                return it;
            }
            for (int i = 0; i < n_; ++i) {
                shift_[i] = bt + pot.eval_split(phi[i]).f1dd;
                neg_g_[i] = -g_[i];
                delta_[i] = 0.0;
            }
            cg_iterations += detail::solve_shifted(grid_, shift_, neg_g_, delta_, opt.cg_tolerance).iterations;

            double t = 1.0;
            bool accepted = false;
            bool blocked = false;
            double rc = 0.0;
            for (int h = 0; h <= opt.max_step_halvings; ++h, t *= 0.5) {
                bool inside = true;
                for (int i = 0; i < n_; ++i) {
                    cand_[i] = phi[i] + t * delta_[i];
                    if (pot.singular() && !pot.admissible(cand_[i])) {
                        inside = false;
                    }
                }
                if (!inside) {
                    blocked = true;
                    continue;
                }
                rc = residual(phi_old, rhs, cand_, gc_);
                if (rc <= res) {
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                if (res <= 1e3 * tol) {
                    return it;
                }
                if (blocked) {
                    throw SeparationLoss(step + 1, min_margin(pot, phi));
                }
                throw NewtonDivergence(step + 1, "line search failed");
            }
            const double step_size = t * max_abs(delta_);
            std::copy(cand_.begin(), cand_.end(), phi.begin());
            std::swap(g_, gc_);
            res = rc;
            if (step_size <= 1e-15 * (1.0 + max_abs(phi))) {
                return it + 1;
            }
        }
        if (res <= tol) {
            return opt.newton_max_iterations;
        }
        throw NewtonDivergence(step + 1, "no convergence within the iteration limit");
    }

private:
    double residual(std::span<const double> phi_old, std::span<const double> rhs, std::span<const double> x,
                    std::vector<double>& out)
    {
        const double bt = model_.params.beta / tau_;
        apply_laplacian(grid_, x, lap_);
        double m = 0.0;
        for (int i = 0; i < n_; ++i) {
            out[i] = bt * (x[i] - phi_old[i]) - lap_[i] + model_.potential.eval_split(x[i]).f1d - rhs[i];
            m = std::max(m, std::abs(out[i]));
        }
        return m;
    }

    const Model& model_;
    const GridSpec& grid_;
    double tau_;
    int n_;
    std::vector<double> lap_, g_, gc_, shift_, delta_, cand_, neg_g_;
};

} // namespace

Trajectory solve_state(const Model& model, const ControlPair& controls, const StateTriple& init,
                       StateDiagnostics* diagnostics)
{
    const auto& p = model.params;
    const auto& pot = model.potential;
    const auto& h = model.interp;
    p.validate();
    const GridSpec grid = init.phi.grid();
    const TimeGrid time = controls.u1.time();
    if (!(init.mu.grid() == grid) || !(init.sigma.grid() == grid)) {
        throw ShapeMismatch("solve_state: initial fields live on different grids");
    }
    require_control_shape(controls, grid, time, "solve_state");
    if (pot.singular()) {
        for (double v : init.phi.values()) {
            if (!pot.admissible(v)) {
                throw SeparationLoss(0, min_margin(pot, init.phi.values()));
            }
        }
    }

    Trajectory traj{SpaceTimeField::nodes(grid, time), SpaceTimeField::nodes(grid, time),
                    SpaceTimeField::nodes(grid, time)};
    traj.mu.set_snapshot(0, init.mu);
    traj.phi.set_snapshot(0, init.phi);
    traj.sigma.set_snapshot(0, init.sigma);

    const int n = grid.cells();
    const double tau = time.tau();
    std::vector<double> rhs(n), shift(n), lap(n), hval(n);
    PhiNewton newton(model, grid, tau);
    StateDiagnostics diag;

    for (int step = 0; step < time.n_steps; ++step) {
        auto mu_o = traj.mu.slice(step);
        auto phi_o = traj.phi.slice(step);
        auto sig_o = traj.sigma.slice(step);
        auto mu_n = traj.mu.slice(step + 1);
        auto phi_n = traj.phi.slice(step + 1);
        auto sig_n = traj.sigma.slice(step + 1);
        auto u1 = controls.u1.slice(step);
        auto u2 = controls.u2.slice(step);

        for (int i = 0; i < n; ++i) {
            rhs[i] = mu_o[i] + p.chi * sig_o[i] - pot.eval_split(phi_o[i]).f2d;
            hval[i] = h.h(phi_o[i]);
        }
        std::copy(phi_o.begin(), phi_o.end(), phi_n.begin());
        const int its = newton.solve(phi_o, rhs, phi_n, step, diag.cg_iterations);
        diag.newton_iterations += its;
        diag.max_newton_iterations = std::max(diag.max_newton_iterations, its);

        const double at = p.alpha / tau;
        for (int i = 0; i < n; ++i) {
            rhs[i] = at * mu_o[i] + (p.p_rate * sig_o[i] - p.a_rate - u1[i]) * hval[i] - (phi_n[i] - phi_o[i]) / tau;
            shift[i] = at;
        }
        std::copy(mu_o.begin(), mu_o.end(), mu_n.begin());
        diag.cg_iterations += detail::solve_shifted(grid, shift, rhs, mu_n, model.solver.cg_tolerance).iterations;

        apply_laplacian(grid, phi_n, lap);
        for (int i = 0; i < n; ++i) {
            rhs[i] = sig_o[i] / tau - p.chi * lap[i] + p.b_rate * p.sigma_s + u2[i];
            shift[i] = 1.0 / tau + p.b_rate + p.e_rate * hval[i];
        }
        std::copy(sig_o.begin(), sig_o.end(), sig_n.begin());
        diag.cg_iterations += detail::solve_shifted(grid, shift, rhs, sig_n, model.solver.cg_tolerance).iterations;
    }

    diag.min_margin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < traj.phi.slices(); ++k) {
        const double m = min_margin(pot, traj.phi.slice(k));
        if (m < diag.min_margin) {
            diag.min_margin = m;
            diag.min_margin_step = k;
        }
    }
    if (diagnostics != nullptr) {
        *diagnostics = diag;
    }
    return traj;
}

Trajectory solve_linearized(const Model& model, const Trajectory& base, const ControlPair& base_controls,
                            const LinearizedSpec& spec)
{
    const auto& p = model.params;
    const auto& pot = model.potential;
    const auto& h = model.interp;
    const GridSpec grid = base.phi.grid();
    const TimeGrid time = base.phi.time();
    require_node_shape(base.mu, grid, time, "solve_linearized");
    require_node_shape(base.phi, grid, time, "solve_linearized");
    require_node_shape(base.sigma, grid, time, "solve_linearized");
    require_control_shape(base_controls, grid, time, "solve_linearized");
    if (spec.lam2) {
        require_control_shape(spec.direction, grid, time, "solve_linearized");
    }
    if (spec.lam3) {
        require_node_shape(spec.f1, grid, time, "solve_linearized");
        require_node_shape(spec.f2, grid, time, "solve_linearized");
        require_node_shape(spec.f3, grid, time, "solve_linearized");
    }
    if (spec.lam4) {
        if (!(spec.init.mu.grid() == grid) || !(spec.init.phi.grid() == grid) || !(spec.init.sigma.grid() == grid)) {
            throw ShapeMismatch("solve_linearized: initial data grid mismatch");
        }
    }

    Trajectory out{SpaceTimeField::nodes(grid, time), SpaceTimeField::nodes(grid, time),
                   SpaceTimeField::nodes(grid, time)};
    if (spec.lam4) {
        out.mu.set_snapshot(0, spec.init.mu);
        out.phi.set_snapshot(0, spec.init.phi);
        out.sigma.set_snapshot(0, spec.init.sigma);
    }

    const int n = grid.cells();
    const double tau = time.tau();
    const double l1 = spec.lam1 ? 1.0 : 0.0;
    const double l2 = spec.lam2 ? 1.0 : 0.0;
    const double l3 = spec.lam3 ? 1.0 : 0.0;
    std::vector<double> rhs(n), shift(n), lap(n), hn(n), hdn(n);

    for (int step = 0; step < time.n_steps; ++step) {
        auto mu_o = out.mu.slice(step);
        auto phi_o = out.phi.slice(step);
        auto sig_o = out.sigma.slice(step);
        auto mu_n = out.mu.slice(step + 1);
        auto phi_n = out.phi.slice(step + 1);
        auto sig_n = out.sigma.slice(step + 1);
        auto bphi_o = base.phi.slice(step);
        auto bphi_n = base.phi.slice(step + 1);
        auto bsig_n = base.sigma.slice(step + 1);
        auto bu1 = base_controls.u1.slice(step);

        // Coefficients frozen on the base trajectory at the new time level.
        for (int i = 0; i < n; ++i) {
            const auto hv = h.eval(bphi_n[i]);
            hn[i] = hv.h;
            hdn[i] = hv.hd;
        }

        const double bt = p.beta / tau;
        for (int i = 0; i < n; ++i) {
            const double f2dd_old = pot.eval_split(bphi_o[i]).f2dd;
            rhs[i] = bt * phi_o[i] + mu_o[i] + l1 * (p.chi * sig_o[i] - f2dd_old * phi_o[i]);
            if (spec.lam3) {
                rhs[i] += spec.f2.at(step + 1, i);
            }
            shift[i] = bt + l1 * pot.eval_split(bphi_n[i]).f1dd;
        }
        std::copy(phi_o.begin(), phi_o.end(), phi_n.begin());
        detail::solve_shifted(grid, shift, rhs, phi_n, model.solver.cg_tolerance);

        const double at = p.alpha / tau;
        for (int i = 0; i < n; ++i) {
            double src = l1 * (p.p_rate * sig_o[i] * hn[i] +
                               (p.p_rate * bsig_n[i] - p.a_rate - bu1[i]) * hdn[i] * phi_n[i]);
            if (spec.lam2) {
                src -= l2 * spec.direction.u1.at(step, i) * hn[i];
            }
            if (spec.lam3) {
                src += l3 * spec.f1.at(step + 1, i);
            }
            rhs[i] = at * mu_o[i] + src - (phi_n[i] - phi_o[i]) / tau;
            shift[i] = at;
        }
        std::copy(mu_o.begin(), mu_o.end(), mu_n.begin());
        detail::solve_shifted(grid, shift, rhs, mu_n, model.solver.cg_tolerance);

        apply_laplacian(grid, phi_n, lap);
        for (int i = 0; i < n; ++i) {
            double src = -l1 * p.e_rate * bsig_n[i] * hdn[i] * phi_n[i];
            if (spec.lam2) {
                src += l2 * spec.direction.u2.at(step, i);
            }
            if (spec.lam3) {
                src += l3 * spec.f3.at(step + 1, i);
            }
            rhs[i] = sig_o[i] / tau - p.chi * lap[i] + src;
            shift[i] = 1.0 / tau + l1 * (p.b_rate + p.e_rate * hn[i]);
        }
        std::copy(sig_o.begin(), sig_o.end(), sig_n.begin());
        detail::solve_shifted(grid, shift, rhs, sig_n, model.solver.cg_tolerance);
    }
    return out;
}

AdjointTriple solve_adjoint(const Model& model, const Trajectory& base, const ControlPair& base_controls,
                            const Targets& targets)
{
    const auto& p = model.params;
    const auto& pot = model.potential;
    const auto& h = model.interp;
    const GridSpec grid = base.phi.grid();
    const TimeGrid time = base.phi.time();
    require_node_shape(base.mu, grid, time, "solve_adjoint");
    require_node_shape(base.phi, grid, time, "solve_adjoint");
    require_node_shape(base.sigma, grid, time, "solve_adjoint");
    require_control_shape(base_controls, grid, time, "solve_adjoint");
    require_node_shape(targets.phi_q, grid, time, "solve_adjoint");
    if (!(targets.phi_omega.grid() == grid)) {
        throw ShapeMismatch("solve_adjoint: final-time target grid mismatch");
    }

    AdjointTriple adj{SpaceTimeField::nodes(grid, time), SpaceTimeField::nodes(grid, time),
                      SpaceTimeField::nodes(grid, time)};
    const int n = grid.cells();
    const int N = time.n_steps;
    const double tau = time.tau();

    std::vector<double> rhs(n), shift(n), lap(n);
    const double at = p.alpha / tau;
    const double bt = p.beta / tau;

    // The stored final node carries the terminal condition. The backward sweep starts from the
    // multiplier of the last discrete phi-step instead, which differs by O(tau) and makes
    // d the exact gradient of the discrete cost.
    std::vector<double> p2_last(n);
    {
        auto psi2 = adj.psi2.slice(N);
        auto phiT = base.phi.slice(N);
        auto phi_q = targets.phi_q.slice(N);
        for (int i = 0; i < n; ++i) {
            psi2[i] = p.beta2 * (phiT[i] - targets.phi_omega[i]) / p.beta;
            rhs[i] = p.beta1 * (phiT[i] - phi_q[i]) + p.beta2 * (phiT[i] - targets.phi_omega[i]) / tau;
            shift[i] = bt + pot.eval_split(phiT[i]).f1dd;
        }
        detail::solve_shifted(grid, shift, rhs, p2_last, model.solver.cg_tolerance);
    }

    for (int m = N - 1; m >= 0; --m) {
        auto p1_n = adj.psi1.slice(m + 1);
        auto p2_n = m + 1 == N ? std::span<const double>(p2_last) : adj.psi2.slice(m + 1);
        auto p3_n = adj.psi3.slice(m + 1);
        auto p1 = adj.psi1.slice(m);
        auto p2 = adj.psi2.slice(m);
        auto p3 = adj.psi3.slice(m);
        auto phi = base.phi.slice(m);
        auto phi_prev = base.phi.slice(m > 0 ? m - 1 : 0);
        auto sig = base.sigma.slice(m);
        auto sig_next = base.sigma.slice(m + 1);
        auto u1 = base_controls.u1.slice(m);
        auto phi_q = targets.phi_q.slice(m);

        // -alpha d_t psi1 - Lap psi1 = psi2
        for (int i = 0; i < n; ++i) {
            rhs[i] = at * p1_n[i] + p2_n[i];
            shift[i] = at;
        }
        std::copy(p1_n.begin(), p1_n.end(), p1.begin());
        detail::solve_shifted(grid, shift, rhs, p1, model.solver.cg_tolerance);

        // -d_t psi3 - Lap psi3 = P h psi1 + chi psi2 - B psi3 - E h psi3
        for (int i = 0; i < n; ++i) {
            const double hv = h.h(phi[i]);
            rhs[i] = p3_n[i] / tau + p.p_rate * hv * p1_n[i] + p.chi * p2_n[i];
            shift[i] = 1.0 / tau + p.b_rate + p.e_rate * h.h(phi_prev[i]);
        }
        std::copy(p3_n.begin(), p3_n.end(), p3.begin());
        detail::solve_shifted(grid, shift, rhs, p3, model.solver.cg_tolerance);

        // -d_t(psi1 + beta psi2) - Lap(psi2 - chi psi3) = beta1 (phi - phi_Q) + (P sigma - A - u1) h' psi1
        //                                                 - F'' psi2 - E sigma h' psi3,
        // with d_t psi1 taken from the psi1 step above.
        apply_laplacian(grid, p3, lap);
        for (int i = 0; i < n; ++i) {
            const auto sp = pot.eval_split(phi[i]);
            const double hd = h.eval(phi[i]).hd;
            rhs[i] = bt * p2_n[i] - sp.f2dd * p2_n[i] - (p1[i] - p1_n[i]) / tau - p.chi * lap[i] +
                     p.beta1 * (phi[i] - phi_q[i]) + (p.p_rate * sig[i] - p.a_rate - u1[i]) * hd * p1_n[i] -
                     p.e_rate * sig_next[i] * hd * p3_n[i];
            shift[i] = bt + sp.f1dd;
        }
        std::copy(p2_n.begin(), p2_n.end(), p2.begin());
        detail::solve_shifted(grid, shift, rhs, p2, model.solver.cg_tolerance);
    }
    return adj;
}

ControlPair control_sensitivity(const Model& model, const AdjointTriple& adjoint, const Trajectory& base)
{
    const GridSpec grid = base.phi.grid();
    const TimeGrid time = base.phi.time();
    require_node_shape(adjoint.psi1, grid, time, "control_sensitivity");
    require_node_shape(adjoint.psi3, grid, time, "control_sensitivity");
    auto d = ControlPair::zeros(grid, time);
    for (int k = 0; k < time.n_steps; ++k) {
        auto phi = base.phi.slice(k);
        auto psi1 = adjoint.psi1.slice(k + 1);
        auto psi3 = adjoint.psi3.slice(k + 1);
        auto d1 = d.u1.slice(k);
        auto d2 = d.u2.slice(k);
        for (int i = 0; i < grid.cells(); ++i) {
            d1[i] = -psi1[i] * model.interp.h(phi[i]);
            d2[i] = psi3[i];
        }
    }
    return d;
}

std::vector<BalanceRow> state_balance_report(const Trajectory& traj, const ModelParams& p,
                                             const ControlPair& controls, const Interpolant& interp)
{
    const GridSpec grid = traj.phi.grid();
    const TimeGrid time = traj.phi.time();
    require_control_shape(controls, grid, time, "state_balance_report");
    const double tau = time.tau();
    const int n = grid.cells();
    const double volume = grid.volume();
    auto avg = [&](const std::vector<double>& v) { return integral(grid, v) / volume; };

    std::vector<BalanceRow> rows;
    std::vector<double> dmu(n), dphi(n), src(n), dsig(n), nsrc(n), lap(n);
    for (int k = 0; k < time.n_steps; ++k) {
        auto mu_o = traj.mu.slice(k);
        auto mu_n = traj.mu.slice(k + 1);
        auto phi_o = traj.phi.slice(k);
        auto phi_n = traj.phi.slice(k + 1);
        auto sig_o = traj.sigma.slice(k);
        auto sig_n = traj.sigma.slice(k + 1);
        auto u1 = controls.u1.slice(k);
        auto u2 = controls.u2.slice(k);
        apply_laplacian(grid, phi_n, lap);
        for (int i = 0; i < n; ++i) {
            const double hv = interp.h(phi_o[i]);
            dmu[i] = mu_n[i] - mu_o[i];
            dphi[i] = phi_n[i] - phi_o[i];
            src[i] = (p.p_rate * sig_o[i] - p.a_rate - u1[i]) * hv;
            dsig[i] = sig_n[i] - sig_o[i];
            nsrc[i] = -p.chi * lap[i] + p.b_rate * (p.sigma_s - sig_n[i]) - p.e_rate * sig_n[i] * hv + u2[i];
        }
        BalanceRow row;
        row.step = k + 1;
        const double a = p.alpha * avg(dmu);
        const double b = avg(dphi);
        const double c = tau * avg(src);
        row.mass_residual = std::abs(a + b - c);
        const double mscale = std::abs(a) + std::abs(b) + std::abs(c);
        row.mass_relative = mscale > 0.0 ? row.mass_residual / mscale : row.mass_residual;
        const double d = avg(dsig);
        const double e = tau * avg(nsrc);
        row.nutrient_residual = std::abs(d - e);
        const double nscale = std::abs(d) + std::abs(e);
        row.nutrient_relative = nscale > 0.0 ? row.nutrient_residual / nscale : row.nutrient_residual;
        row.mean_sigma = integral(grid, sig_n) / volume;
        rows.push_back(row);
    }
    return rows;
}

} // namespace tsc
