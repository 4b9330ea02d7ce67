#include "tsc/errors.hpp"
#include "tsc/solver.hpp"

#include <doctest.h>

#include <boost/numeric/odeint.hpp>

#include <array>
#include <cmath>
#include <numbers>
#include <random>

using namespace tsc;

namespace {

StateTriple constant_init(const GridSpec& g, double mu, double phi, double sigma)
{
    return {Field(g, mu), Field(g, phi), Field(g, sigma)};
}

ControlPair random_controls(const GridSpec& g, const TimeGrid& t, double amp, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> d(-amp, amp);
    auto u = ControlPair::zeros(g, t);
    for (int c = 0; c < 2; ++c) {
        for (auto& v : u[c].values()) {
            v = d(rng);
        }
    }
    return u;
}

StateTriple smooth_init(const GridSpec& g)
{
    StateTriple s{Field(g), Field(g), Field(g)};
    for (int c = 0; c < g.cells(); ++c) {
        const double x = g.center(c)[0] / g.length[0];
        s.mu[c] = 0.2 * std::sin(3 * x);
        s.phi[c] = 0.6 * std::cos(std::numbers::pi * x);
        s.sigma[c] = 0.5 + 0.3 * x * x;
    }
    return s;
}

Model coupled_model(Potential pot)
{
    Model m;
    m.potential = std::move(pot);
    m.params.chi = 0.3;
    m.params.p_rate = 0.8;
    m.params.a_rate = 0.2;
    m.params.b_rate = 0.5;
    m.params.e_rate = 0.4;
    m.params.sigma_s = 1.0;
    return m;
}

double rel_diff(const SpaceTimeField& a, const SpaceTimeField& b)
{
    return norm(a - b) / std::max(norm(b), 1e-300);
}

} // namespace

TEST_CASE("stationary trivial trajectory")
{
    const auto g = GridSpec::line(16, 1.0);
    const TimeGrid t{1.0, 10};
    Model m;
    m.params.chi = 0.5;
    m.params.p_rate = 1.0;
    m.params.b_rate = 1.0;
    m.params.e_rate = 1.0;
    const auto u = ControlPair::zeros(g, t);
    const auto traj = solve_state(m, u, constant_init(g, 0.0, 1.0, 0.0));
    for (int k = 0; k < traj.phi.slices(); ++k) {
        for (int c = 0; c < g.cells(); ++c) {
            CHECK(traj.mu.at(k, c) == 0.0);
            CHECK(traj.phi.at(k, c) == 1.0);
            CHECK(traj.sigma.at(k, c) == 0.0);
        }
    }
    for (const auto& row : state_balance_report(traj, m.params, u, m.interp)) {
        CHECK(row.mass_residual == 0.0);
        CHECK(row.nutrient_residual == 0.0);
    }
}

TEST_CASE("spatially uniform data follows the reduced ODE system")
{
    namespace ode = boost::numeric::odeint;
    using State = std::array<double, 3>;

    for (const auto& pot : {Potential::regular(), Potential::logarithmic(1.5)}) {
        Model m = coupled_model(pot);
        m.params.alpha = 0.5;
        m.params.beta = 2.0;
        const double u1 = 0.3;
        const double u2 = 0.2;
        const double T = 1.0;
        const auto g = GridSpec::rect(3, 2, 1.0, 1.0);
        const TimeGrid t{T, 1000};
        auto u = ControlPair::zeros(g, t);
        for (auto& v : u.u1.values()) v = u1;
        for (auto& v : u.u2.values()) v = u2;
        const auto traj = solve_state(m, u, constant_init(g, 0.1, 0.2, 0.7));

        const auto& p = m.params;
        auto rhs = [&](const State& y, State& dy, double) {
            const double h = m.interp.h(y[1]);
            const double dphi = (y[0] + p.chi * y[2] - m.potential.eval(y[1]).d1) / p.beta;
            dy[1] = dphi;
            dy[0] = ((p.p_rate * y[2] - p.a_rate - u1) * h - dphi) / p.alpha;
            dy[2] = p.b_rate * (p.sigma_s - y[2]) - p.e_rate * y[2] * h + u2;
        };
        State y{0.1, 0.2, 0.7};
        ode::integrate_adaptive(ode::make_controlled(1e-13, 1e-13, ode::runge_kutta_dopri5<State>()), rhs, y, 0.0,
                                T, 1e-4);

        const auto last = traj.phi.slices() - 1;
        const std::array<double, 3> num{traj.mu.at(last, 0), traj.phi.at(last, 0), traj.sigma.at(last, 0)};
        double err = 0.0;
        double mag = 0.0;
        for (int i = 0; i < 3; ++i) {
            err = std::max(err, std::abs(num[i] - y[i]));
            mag = std::max(mag, std::abs(y[i]));
        }
        CHECK(err / mag <= 1e-3);
        // Every cell carries the same value.
        for (int c = 1; c < g.cells(); ++c) {
            CHECK(traj.phi.at(last, c) == doctest::Approx(traj.phi.at(last, 0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("mirror symmetric data gives mirror symmetric states")
{
    const int n = 20;
    const auto g = GridSpec::line(n, 2.0);
    const TimeGrid t{0.5, 25};
    const Model m = coupled_model(Potential::logarithmic(2.0));
    StateTriple init{Field(g), Field(g), Field(g)};
    auto u = ControlPair::zeros(g, t);
    for (int c = 0; c < n; ++c) {
        const double s = g.center(c)[0] - 1.0;
        init.mu[c] = 0.3 * s * s;
        init.phi[c] = 0.8 * std::exp(-4 * s * s) - 0.3;
        init.sigma[c] = 1.0 - 0.2 * s * s;
        for (int k = 0; k < t.n_steps; ++k) {
            u.u1.at(k, c) = std::cos(s * k);
            u.u2.at(k, c) = 0.5 * s * s;
        }
    }
    const auto traj = solve_state(m, u, init);
    for (const auto* f : {&traj.mu, &traj.phi, &traj.sigma}) {
        for (int k = 0; k < f->slices(); ++k) {
            for (int c = 0; c < n / 2; ++c) {
                CHECK(std::abs(f->at(k, c) - f->at(k, n - 1 - c)) <= 1e-10);
            }
        }
    }
}

TEST_CASE("shape and domain errors")
{
    const auto g = GridSpec::line(4, 1.0);
    const TimeGrid t{1.0, 4};
    Model m;
    auto u = ControlPair::zeros(GridSpec::line(5, 1.0), t);
    CHECK_THROWS_AS(solve_state(m, u, constant_init(g, 0, 0, 0)), ShapeMismatch);
    m.potential = Potential::logarithmic(2.0);
    try {
        solve_state(m, ControlPair::zeros(g, t), constant_init(g, 0, 1.0, 0));
        FAIL("expected SeparationLoss");
    } catch (const SeparationLoss& e) {
        CHECK(e.step() == 0);
    }
}

TEST_CASE("discrete balances")
{
    for (const auto& g : {GridSpec::line(32, 1.0), GridSpec::rect(8, 6, 1.0, 0.7)}) {
        const TimeGrid t{0.5, 40};
        const Model m = coupled_model(Potential::logarithmic(2.0));
        StateTriple init{Field(g), Field(g), Field(g)};
        for (int c = 0; c < g.cells(); ++c) {
            const auto x = g.center(c);
            init.phi[c] = 0.5 * std::cos(3 * x[0] + x[1]);
            init.sigma[c] = 0.5 + 0.1 * x[0];
        }
        const auto u = random_controls(g, t, 1.0, 11);
        const auto traj = solve_state(m, u, init);
        for (const auto& row : state_balance_report(traj, m.params, u, m.interp)) {
            CHECK(row.mass_relative <= 1e-10);
            CHECK(row.nutrient_relative <= 1e-10);
        }
    }

    // Pure source: <sigma> gains tau c per step.
    const auto g = GridSpec::line(10, 1.0);
    const TimeGrid t{1.0, 8};
    Model m;
    auto u = ControlPair::zeros(g, t);
    const double c = 0.75;
    for (auto& v : u.u2.values()) v = c;
    StateTriple init = smooth_init(g);
    const auto traj = solve_state(m, u, init);
    const auto rows = state_balance_report(traj, m.params, u, m.interp);
    double prev = mean(init.sigma);
    for (const auto& row : rows) {
        CHECK(row.mean_sigma - prev == doctest::Approx(t.tau() * c).epsilon(1e-12));
        prev = row.mean_sigma;
    }
}

TEST_CASE("logarithmic runs stay separated")
{
    const auto g = GridSpec::line(64, 1.0);
    const TimeGrid t{1.0, 64};
    const Model m = coupled_model(Potential::logarithmic(2.0));
    StateDiagnostics diag;
    const auto traj = solve_state(m, random_controls(g, t, 1.0, 3), smooth_init(g), &diag);
    CHECK(diag.min_margin > 0.0);
    CHECK(traj.phi.max_abs() < 1.0);
    CHECK(diag.max_newton_iterations <= m.solver.newton_max_iterations);
}

TEST_CASE("linearized system with all switches off is zero")
{
    const auto g = GridSpec::line(8, 1.0);
    const TimeGrid t{1.0, 5};
    const Model m = coupled_model(Potential::logarithmic(2.0));
    const auto u = random_controls(g, t, 0.5, 1);
    const auto base = solve_state(m, u, smooth_init(g));
    LinearizedSpec spec;
    spec.lam1 = spec.lam2 = spec.lam3 = spec.lam4 = false;
    const auto out = solve_linearized(m, base, u, spec);
    CHECK(out.mu.max_abs() == 0.0);
    CHECK(out.phi.max_abs() == 0.0);
    CHECK(out.sigma.max_abs() == 0.0);

    auto zero_dir = LinearizedSpec::derivative(ControlPair::zeros(g, t));
    CHECK(solve_linearized(m, base, u, zero_dir).phi.max_abs() == 0.0);
}

namespace {

// Manufactured fields t cos(pi x / L) for the source-only system.
double mms_error(int cells, int steps, double T)
{
    const double L = 1.0;
    const auto g = GridSpec::line(cells, L);
    const TimeGrid t{T, steps};
    Model m;
    m.params.alpha = 0.7;
    m.params.beta = 1.3;
    m.params.chi = 0.4;
    const auto u = ControlPair::zeros(g, t);
    const auto base = solve_state(m, u, constant_init(g, 0, 0, 0));

    const double k2 = std::pow(std::numbers::pi / L, 2);
    const auto& p = m.params;
    LinearizedSpec spec;
    spec.lam1 = false;
    spec.lam2 = false;
    spec.lam3 = true;
    spec.f1 = spec.f2 = spec.f3 = SpaceTimeField::nodes(g, t);
    auto exact = SpaceTimeField::nodes(g, t);
    for (int n = 0; n < t.n_steps + 1; ++n) {
        const double tn = t.time(n);
        for (int c = 0; c < cells; ++c) {
            const double cs = std::cos(std::numbers::pi * g.center(c)[0] / L);
            exact.at(n, c) = tn * cs;
            spec.f1.at(n, c) = (p.alpha + tn * k2 + 1.0) * cs;
            spec.f2.at(n, c) = (p.beta + tn * k2 - tn) * cs;
            spec.f3.at(n, c) = (1.0 + tn * k2 - p.chi * tn * k2) * cs;
        }
    }
    const auto out = solve_linearized(m, base, u, spec);
    double err = 0.0;
    for (const auto* f : {&out.mu, &out.phi, &out.sigma}) {
        for (int c = 0; c < cells; ++c) {
            err = std::max(err, std::abs(f->at(t.n_steps, c) - exact.at(t.n_steps, c)));
        }
    }
    return err;
}

} // namespace

TEST_CASE("linearized solver converges on a manufactured solution")
{
    std::vector<double> et;
    for (int steps : {20, 40, 80}) {
        et.push_back(mms_error(256, steps, 1.0));
    }
    for (std::size_t i = 1; i < et.size(); ++i) {
        CHECK(std::log2(et[i - 1] / et[i]) >= 0.9);
    }

    std::vector<double> eh;
    for (int cells : {8, 16, 32}) {
        eh.push_back(mms_error(cells, 20000, 0.2));
    }
    for (std::size_t i = 1; i < eh.size(); ++i) {
        CHECK(std::log2(eh[i - 1] / eh[i]) >= 1.9);
    }
}

TEST_CASE("linearized solver is linear in its data")
{
    const auto g = GridSpec::line(12, 1.0);
    const TimeGrid t{0.5, 10};
    const Model m = coupled_model(Potential::logarithmic(2.0));
    const auto u = random_controls(g, t, 0.5, 2);
    const auto base = solve_state(m, u, smooth_init(g));

    auto make = [&](std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> d;
        LinearizedSpec s;
        s.lam3 = true;
        s.lam4 = true;
        s.direction = random_controls(g, t, 1.0, seed + 100);
        s.f1 = s.f2 = s.f3 = SpaceTimeField::nodes(g, t);
        for (auto* f : {&s.f1, &s.f2, &s.f3}) {
            for (auto& v : f->values()) v = d(rng);
        }
        s.init = {Field(g), Field(g), Field(g)};
        for (auto* f : {&s.init.mu, &s.init.phi, &s.init.sigma}) {
            for (auto& v : f->values()) v = d(rng);
        }
        return s;
    };
    const auto a = make(5);
    const auto b = make(6);
    auto sum = a;
    sum.direction += b.direction;
    sum.f1 += b.f1;
    sum.f2 += b.f2;
    sum.f3 += b.f3;
    sum.init.mu += b.init.mu;
    sum.init.phi += b.init.phi;
    sum.init.sigma += b.init.sigma;
    auto twice = a;
    twice.direction *= 2.0;
    twice.f1 *= 2.0;
    twice.f2 *= 2.0;
    twice.f3 *= 2.0;
    twice.init.mu *= 2.0;
    twice.init.phi *= 2.0;
    twice.init.sigma *= 2.0;

    const auto ya = solve_linearized(m, base, u, a);
    const auto yb = solve_linearized(m, base, u, b);
    const auto ys = solve_linearized(m, base, u, sum);
    const auto y2 = solve_linearized(m, base, u, twice);
    CHECK(rel_diff(ys.mu, ya.mu + yb.mu) <= 1e-10);
    CHECK(rel_diff(ys.phi, ya.phi + yb.phi) <= 1e-10);
    CHECK(rel_diff(ys.sigma, ya.sigma + yb.sigma) <= 1e-10);
    CHECK(rel_diff(y2.mu, 2.0 * ya.mu) <= 1e-10);
    CHECK(rel_diff(y2.phi, 2.0 * ya.phi) <= 1e-10);
    CHECK(rel_diff(y2.sigma, 2.0 * ya.sigma) <= 1e-10);
}

namespace {

double linearized_fd_error(int cells, int steps, double eps)
{
    const auto g = GridSpec::line(cells, 1.0);
    const TimeGrid t{0.5, steps};
    const Model m = coupled_model(Potential::logarithmic(2.0));
    const auto init = smooth_init(g);
    auto u = ControlPair::zeros(g, t);
    auto k = ControlPair::zeros(g, t);
    for (int n = 0; n < steps; ++n) {
        for (int c = 0; c < cells; ++c) {
            const double x = g.center(c)[0];
            const double s = t.time(n + 1);
            u.u1.at(n, c) = 0.3 * std::sin(2 * x + s);
            u.u2.at(n, c) = 0.2 * x;
            k.u1.at(n, c) = std::cos(3 * x) * s;
            k.u2.at(n, c) = 1.0 - x * s;
        }
    }
    const auto base = solve_state(m, u, init);
    const auto lin = solve_linearized(m, base, u, LinearizedSpec::derivative(k));
    const auto up = solve_state(m, u + eps * k, init);
    const auto dn = solve_state(m, u - eps * k, init);
    auto fd = up.phi - dn.phi;
    fd *= 1.0 / (2 * eps);
    return rel_diff(lin.phi, fd);
}

} // namespace

TEST_CASE("linearized solution matches finite differences of the state")
{
    std::vector<double> errs;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        errs.push_back(linearized_fd_error(32, 32, eps));
    }
    CHECK(errs[0] > errs[1]);
    CHECK(errs[1] >= errs[2] * 0.999);
    CHECK(errs[2] <= 1e-2);
    CHECK(linearized_fd_error(64, 64, 1e-3) < errs[2]);
}

TEST_CASE("adjoint terminal data and trivial cases")
{
    const auto g = GridSpec::line(16, 1.0);
    const TimeGrid t{0.5, 20};
    Model m = coupled_model(Potential::logarithmic(2.0));
    const auto u = random_controls(g, t, 0.5, 9);
    const auto base = solve_state(m, u, smooth_init(g));
    Targets tg{SpaceTimeField::nodes(g, t, 0.1), Field(g, -0.2)};

    auto zero = solve_adjoint(m, base, u, tg);
    CHECK(zero.psi1.max_abs() == 0.0);
    CHECK(zero.psi2.max_abs() == 0.0);
    CHECK(zero.psi3.max_abs() == 0.0);
    const auto d0 = control_sensitivity(m, zero, base);
    CHECK(d0.max_abs() == 0.0);

    m.params.beta2 = 1.0;
    const auto adj = solve_adjoint(m, base, u, tg);
    for (int c = 0; c < g.cells(); ++c) {
        CHECK(adj.psi2.at(t.n_steps, c) == base.phi.at(t.n_steps, c) - tg.phi_omega[c]);
        CHECK(adj.psi1.at(t.n_steps, c) == 0.0);
        CHECK(adj.psi3.at(t.n_steps, c) == 0.0);
    }
    CHECK(adj.psi2.max_abs() > 0.0);

    // Targets equal to the trajectory itself give a vanishing adjoint.
    m.params.beta1 = 1.0;
    m.params.beta2 = 0.0;
    const auto fix = solve_adjoint(m, base, u, Targets{base.phi, Field(g)});
    CHECK(fix.psi1.max_abs() == 0.0);
    CHECK(fix.psi2.max_abs() == 0.0);
    CHECK(fix.psi3.max_abs() == 0.0);

    CHECK_THROWS_AS(solve_adjoint(m, base, u, Targets{base.phi, Field(GridSpec::line(3, 1.0))}), ShapeMismatch);
}

namespace {

// Relative mismatch between the state-side and adjoint-side directional derivatives.
double duality_gap(int cells, int steps)
{
    const auto g = GridSpec::line(cells, 1.0);
    const TimeGrid t{0.5, steps};
    Model m = coupled_model(Potential::logarithmic(2.0));
    m.params.beta1 = 1.0;
    m.params.beta2 = 0.5;
    auto u = ControlPair::zeros(g, t);
    auto k = ControlPair::zeros(g, t);
    Targets tg{SpaceTimeField::nodes(g, t), Field(g)};
    for (int c = 0; c < cells; ++c) {
        const double x = g.center(c)[0];
        for (int n = 0; n < steps; ++n) {
            const double s = t.time(n + 1);
            u.u1.at(n, c) = 0.3 * std::sin(2 * x + s);
            u.u2.at(n, c) = 0.2 * x;
            k.u1.at(n, c) = std::cos(3 * x) * s;
            k.u2.at(n, c) = 1.0 - x * s;
        }
        for (int n = 0; n <= steps; ++n) {
            tg.phi_q.at(n, c) = 0.4 * std::cos(std::numbers::pi * x);
        }
        tg.phi_omega[c] = -0.5;
    }
    const auto base = solve_state(m, u, smooth_init(g));
    const auto lin = solve_linearized(m, base, u, LinearizedSpec::derivative(k));
    const auto adj = solve_adjoint(m, base, u, tg);
    const auto d = control_sensitivity(m, adj, base);

    const auto misfit = base.phi - tg.phi_q;
    const double a = m.params.beta1 * inner(misfit, lin.phi);
    const double b = m.params.beta2 * inner(base.phi.snapshot(steps) - tg.phi_omega, lin.phi.snapshot(steps));
    const double c = inner(d, k);
    return std::abs(a + b - c) / (std::abs(a) + std::abs(b) + std::abs(c));
}

} // namespace

TEST_CASE("adjoint and linearized solutions are dual")
{
    const double g1 = duality_gap(16, 16);
    const double g2 = duality_gap(32, 32);
    const double g3 = duality_gap(64, 64);
    CHECK(g1 > g2);
    CHECK(g2 > g3);
    CHECK(std::log2(g2 / g3) >= 0.9);
    CHECK(g3 <= 0.05);
}
