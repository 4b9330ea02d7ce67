#include "tsc/config.hpp"
#include "tsc/errors.hpp"
#include "tsc/optim.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace tsc;

namespace {

Problem demo(SparsityMode mode)
{
    auto c = preset("time-sparsity-demo");
    c.mode = mode;
    c.nx = 8;
    c.n_steps = 8;
    return build_problem(c);
}

Problem no_tracking(SparsityMode mode)
{
    auto p = demo(mode);
    p.model.params.beta1 = 0.0;
    p.model.params.beta2 = 0.0;
    return p;
}

ControlPair random_control(const Problem& p, double amp, std::uint64_t seed)
{
    ControlRecipe r;
    r.kind = "random";
    r.amplitude = amp;
    return build_control(r, p, seed);
}

} // namespace

TEST_CASE("reduced cost on the stationary instance is zero")
{
    const auto p = build_problem(preset("stationary-trivial"));
    CHECK(reduced_cost(p, p.zero_control()).total() == 0.0);
}

TEST_CASE("reduced cost of a single full-sparsity entry")
{
    auto c = preset("stationary-trivial");
    c.nx = 1;
    c.n_steps = 1;
    c.params.beta1 = 0.0;
    c.params.beta2 = 0.0;
    c.params.nu = 2.0;
    c.params.kappa = 1.0;
    c.mode = SparsityMode::FullQ;
    c.hi1 = 3.0;
    const auto p = build_problem(c);
    auto u = p.zero_control();
    u.u1.values()[0] = 2.0;
    CHECK(reduced_cost(p, u).total() == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("reduced cost matches a hand-coded quadrature")
{
    const auto p = demo(SparsityMode::TimeT);
    const auto u = random_control(p, 0.8, 3);
    const auto traj = solve_state(p.model, u, p.init);
    const auto& g = p.grid;
    const double vol = g.cell_volume();
    const double tau = p.time.tau();
    const auto& m = p.model.params;
    double tq = 0.0, tf = 0.0, ctl = 0.0, sp = 0.0;
    const int N = p.time.n_steps;
    for (int k = 1; k <= N; ++k) {
        for (int c = 0; c < g.cells(); ++c) {
            const double e = traj.phi.at(k, c) - p.targets.phi_q.at(k, c);
            tq += tau * vol * e * e;
        }
    }
    for (int c = 0; c < g.cells(); ++c) {
        const double e = traj.phi.at(N, c) - p.targets.phi_omega[c];
        tf += vol * e * e;
    }
    for (int n = 0; n < N; ++n) {
        for (int i = 0; i < 2; ++i) {
            double s = 0.0;
            for (int c = 0; c < g.cells(); ++c) {
                const double v = u[i].at(n, c);
                ctl += tau * vol * v * v;
                s += vol * v * v;
            }
            sp += tau * std::sqrt(s);
        }
    }
    const double expect = 0.5 * m.beta1 * tq + 0.5 * m.beta2 * tf + 0.5 * m.nu * ctl + m.kappa * sp;
    CHECK(reduced_cost(p, u).total() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("smooth gradient without tracking is nu u")
{
    const auto p = no_tracking(SparsityMode::TimeT);
    const auto u = random_control(p, 0.5, 5);
    const auto g = smooth_gradient(p, u);
    CHECK(norm(g.gradient - p.model.params.nu * u) == 0.0);
}

TEST_CASE("smooth gradient vanishes at the stationary optimum")
{
    const auto p = build_problem(preset("stationary-trivial"));
    const auto g = smooth_gradient(p, p.zero_control());
    CHECK(g.gradient.max_abs() == 0.0);
}

TEST_CASE("without tracking the optimizer returns zero")
{
    for (auto mode : {SparsityMode::None, SparsityMode::FullQ, SparsityMode::TimeT, SparsityMode::SpaceOmega}) {
        CAPTURE(to_string(mode));
        const auto p = no_tracking(mode);
        const auto r = proximal_gradient_solve(p, random_control(p, 1.0, 7));
        CHECK(r.converged);
        CHECK(r.control.max_abs() <= 1e-8);
    }
}

TEST_CASE("optimizer history is monotone and consistent")
{
    const auto p = demo(SparsityMode::TimeT);
    OptimizeOptions o;
    o.vi_tolerance = 1e-9;
    const auto r = proximal_gradient_solve(p, random_control(p, 0.5, 1), o);
    REQUIRE(r.converged);
    CHECK(static_cast<int>(r.history.size()) == r.iterations + 1);
    for (std::size_t i = 1; i < r.history.size(); ++i) {
        CHECK(r.history[i].cost <= r.history[i - 1].cost + 1e-13 * std::abs(r.history[i - 1].cost));
    }
    CHECK(r.control.admissible(p.bounds));
    CHECK(r.vi_residual <= 1e-9);
    CHECK(vi_residual(p, r.control) == doctest::Approx(r.vi_residual).epsilon(1e-6));
}

TEST_CASE("VI residual is zero at the trivial optimum and positive away from it")
{
    const auto st = build_problem(preset("stationary-trivial"));
    CHECK(vi_residual(st, st.zero_control()) <= 1e-10);

    const auto p = demo(SparsityMode::FullQ);
    const auto r = proximal_gradient_solve(p, p.zero_control());
    auto moved = r.control;
    moved.u1.values()[3] += 0.1;
    CHECK(vi_residual(p, moved) > 1e-3);
}

TEST_CASE("active bounds carry the sign of the stationarity residual")
{
    auto c = preset("time-sparsity-demo");
    c.nx = 8;
    c.n_steps = 8;
    c.mode = SparsityMode::FullQ;
    c.lo1 = c.lo2 = -0.05;
    c.hi1 = c.hi2 = 0.05;
    const auto p = build_problem(c);
    OptimizeOptions o;
    o.vi_tolerance = 1e-10;
    const auto r = proximal_gradient_solve(p, p.zero_control(), o);
    REQUIRE(r.converged);
    const double nu = p.model.params.nu;
    const double kappa = p.model.params.kappa;
    int active = 0;
    for (int i = 0; i < 2; ++i) {
        const auto d = r.d[i].values();
        const auto l = r.lambda[i].values();
        const auto u = r.control[i].values();
        for (std::size_t e = 0; e < u.size(); ++e) {
            const double s = d[e] + kappa * l[e] + nu * u[e];
            if (s > 1e-8) {
                ++active;
                CHECK(u[e] == doctest::Approx(-0.05).epsilon(1e-9));
            }
            if (s < -1e-8) {
                ++active;
                CHECK(u[e] == doctest::Approx(0.05).epsilon(1e-9));
            }
        }
    }
    CHECK(active > 0);
}

TEST_CASE("zero-control threshold")
{
    SUBCASE("no tracking gives zero")
    {
        const auto r = zero_control_threshold(no_tracking(SparsityMode::TimeT));
        CHECK(r.kappa0 == 0.0);
    }
    SUBCASE("time mode is the largest slice norm of d at zero")
    {
        const auto p = demo(SparsityMode::TimeT);
        const auto r = zero_control_threshold(p);
        const auto g = smooth_gradient(p, p.zero_control());
        const double vol = p.grid.cell_volume();
        double expect = 0.0;
        for (int n = 0; n < p.time.n_steps; ++n) {
            double s1 = 0.0, s3 = 0.0;
            for (int c = 0; c < p.grid.cells(); ++c) {
                const double h = p.model.interp.h(g.state.phi.at(n, c));
                const double a = g.adjoint.psi1.at(n + 1, c) * h;
                const double b = g.adjoint.psi3.at(n + 1, c);
                s1 += vol * a * a;
                s3 += vol * b * b;
            }
            expect = std::max({expect, std::sqrt(s1), std::sqrt(s3)});
        }
        CHECK(r.kappa0 == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("optimizer beyond the threshold returns zero")
    {
        auto p = demo(SparsityMode::TimeT);
        p.model.params.kappa = 1.01 * zero_control_threshold(p).kappa0;
        const auto r = proximal_gradient_solve(p, random_control(p, 1.0, 9));
        CHECK(r.control.max_abs() <= 1e-8);
    }
    CHECK_THROWS_AS(zero_control_threshold(demo(SparsityMode::None)), InvalidArgument);
}

TEST_CASE("kappa sweep")
{
    const auto p = demo(SparsityMode::TimeT);
    const double k0 = zero_control_threshold(p).kappa0;
    const auto rows = kappa_sweep(p, {0.0, 0.5 * k0, 2.0 * k0}, p.zero_control());
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].support1 > 0.0);
    CHECK(rows[1].support1 + rows[1].support2 > 0.0);
    CHECK(rows[2].support1 == 0.0);
    CHECK(rows[2].support2 == 0.0);
    for (const auto& r : rows) CHECK(r.converged);

    std::ostringstream os;
    write_sweep_csv(os, rows);
    CHECK(os.str().rfind("kappa,support1,support2,cost,vi_residual,control_norm,iterations,converged\n", 0) == 0);
    CHECK_THROWS_AS(kappa_sweep(p, {1.0, 0.5}, p.zero_control()), InvalidArgument);
}

TEST_CASE("support measure")
{
    const auto g = GridSpec::line(4, 2.0);
    const TimeGrid t{1.0, 2};
    auto u = SpaceTimeField::intervals(g, t);
    u.at(1, 2) = 0.3;
    CHECK(support_measure(SparsityMode::FullQ, u) == doctest::Approx(0.5 * 0.5));
    CHECK(support_measure(SparsityMode::TimeT, u) == doctest::Approx(0.5));
    CHECK(support_measure(SparsityMode::SpaceOmega, u) == doctest::Approx(0.5));
    CHECK(support_measure(SparsityMode::TimeT, u, 1.0) == 0.0);
}

TEST_CASE("step size collapse and option validation")
{
    const auto p = demo(SparsityMode::TimeT);
    OptimizeOptions o;
    o.min_step = 1e3;
    CHECK_THROWS_AS(proximal_gradient_solve(p, random_control(p, 0.5, 2), o), StepsizeCollapse);
    OptimizeOptions bad;
    bad.backtrack = 1.0;
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("history and threshold CSV")
{
    std::ostringstream h;
    write_history_csv(h, {{0, 1.5, 0.25, 0.0, 1.0, 0.5}});
    CHECK(h.str() == "iter,cost,vi_residual,step,support1,support2\n0,1.5,0.25,0,1,0.5\n");
    std::ostringstream t;
    ThresholdReport r;
    r.kappa0 = 2.0;
    r.kappa1 = 2.0;
    r.kappa2 = 1.0;
    write_threshold_csv(t, r, SparsityMode::TimeT);
    CHECK(t.str() == "mode,kappa0,kappa1,kappa2\ntime,2,2,1\n");
}
