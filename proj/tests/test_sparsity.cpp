#include "tsc/errors.hpp"
#include "tsc/sparsity.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace tsc;

namespace {

const SparsityMode kModes[] = {SparsityMode::FullQ, SparsityMode::TimeT, SparsityMode::SpaceOmega};

SpaceTimeField random_field(const GridSpec& g, const TimeGrid& t, double amp, std::mt19937_64& rng)
{
    std::normal_distribution<double> d(0.0, amp);
    auto u = SpaceTimeField::intervals(g, t);
    for (auto& v : u.values()) v = d(rng);
    return u;
}

// Slice objective written out directly from the definition of g.
double prox_objective(SparsityMode mode, const SpaceTimeField& u, const SpaceTimeField& v, double eta, double kappa)
{
    auto diff = u - v;
    return inner(diff, diff) / (2 * eta) + kappa * eval_g(mode, u);
}

} // namespace

TEST_CASE("mode names")
{
    for (auto m : {SparsityMode::None, SparsityMode::FullQ, SparsityMode::TimeT, SparsityMode::SpaceOmega}) {
        CHECK(parse_sparsity_mode(to_string(m)) == m);
    }
    CHECK_THROWS_AS(parse_sparsity_mode("banana"), InvalidArgument);
}

TEST_CASE("sparsity functionals")
{
    const auto unit = GridSpec::line(1, 1.0);
    const TimeGrid one{1.0, 1};
    auto u = ControlPair::zeros(unit, one);
    for (auto m : kModes) CHECK(eval_g(m, u) == 0.0);
    u.u1.at(0, 0) = 2.0;
    for (auto m : kModes) CHECK(eval_g(m, u) == 2.0);
    CHECK(eval_g(SparsityMode::None, u) == 0.0);

    const auto g = GridSpec::rect(3, 4, 2.0, 1.5);
    const TimeGrid t{1.7, 6};
    const double c = -0.8;
    auto w = SpaceTimeField::intervals(g, t, c);
    CHECK(eval_g(SparsityMode::TimeT, w) == doctest::Approx(1.7 * 0.8 * std::sqrt(3.0)));
    CHECK(eval_g(SparsityMode::FullQ, w) == doctest::Approx(1.7 * 0.8 * 3.0));
    CHECK(eval_g(SparsityMode::SpaceOmega, w) == doctest::Approx(3.0 * 0.8 * std::sqrt(1.7)));
}

TEST_CASE("box projection")
{
    CHECK(project_box(3.0, -1.0, 2.0) == 2.0);
    CHECK(project_box(0.5, -1.0, 2.0) == 0.5);
    CHECK(project_box(project_box(-7.0, -1.0, 2.0), -1.0, 2.0) == -1.0);
    CHECK_THROWS_AS(project_box(0.0, 1.0, -1.0), BadBounds);
    const auto f = project_box(Field(GridSpec::line(3, 1.0), 5.0), 0.0, 1.0);
    CHECK(f.max() == 1.0);
}

TEST_CASE("prox examples")
{
    const auto unit = GridSpec::line(1, 1.0);
    const TimeGrid one{1.0, 1};
    const auto box2 = BoxBounds::constant(-2.0, 2.0, -2.0, 2.0);
    auto v = SpaceTimeField::intervals(unit, one, 3.0);
    CHECK(prox(SparsityMode::FullQ, v, 1.0, 1.0, box2, 0).at(0, 0) == 2.0);
    CHECK(prox_scalar(3.0, -2.0, 2.0, 1.0) == 2.0);
    CHECK(prox_scalar(-0.4, -2.0, 2.0, 1.0) == 0.0);

    const auto g = GridSpec::line(4, 1.0);
    const TimeGrid t{1.0, 3};
    for (auto m : kModes) {
        const auto z = prox(m, SpaceTimeField::intervals(g, t), 0.7, 1.3, box2, 1);
        CHECK(z.max_abs() == 0.0);
    }

    // Time slice 1 is small enough to vanish, the others are not.
    auto w = SpaceTimeField::intervals(g, t, 0.0);
    for (int c = 0; c < 4; ++c) {
        w.at(0, c) = 1.0;
        w.at(1, c) = 0.1;
        w.at(2, c) = -0.9;
    }
    const auto p = prox(SparsityMode::TimeT, w, 1.0, 0.3, box2, 0);
    const auto n = slice_norms(p, SliceDirection::Time);
    CHECK(n[0] > 0.0);
    CHECK(n[1] == 0.0);
    CHECK(n[2] > 0.0);
    // Without active bounds the group prox is plain block shrinkage.
    CHECK(p.at(0, 0) == doctest::Approx(1.0 - 0.3).epsilon(1e-12));

    CHECK_THROWS_AS(prox(SparsityMode::FullQ, v, 1.0, 1.0, BoxBounds::constant(0.0, 1.0, -1.0, 1.0), 0), BadBounds);
    CHECK_NOTHROW(prox(SparsityMode::None, v, 1.0, 1.0, BoxBounds::constant(0.0, 1.0, -1.0, 1.0), 0));
    CHECK_THROWS_AS(prox(SparsityMode::FullQ, v, 0.0, 1.0, box2, 0), InvalidArgument);
}

TEST_CASE("prox beats a brute-force search on small slices")
{
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    const auto g = GridSpec::line(2, 0.8);
    const TimeGrid t{0.6, 1};
    for (auto m : kModes) {
        for (int s = 0; s < 40; ++s) {
            const double lo = -0.2 - 1.5 * (unif(rng) + 1.0);
            const double hi = 0.2 + 1.5 * (unif(rng) + 1.0);
            const auto box = BoxBounds::constant(lo, hi, lo, hi);
            const double eta = 0.5 + unif(rng) * 0.4;
            const double kappa = 1.0 + unif(rng) * 0.9;
            const auto v = random_field(g, t, 2.0, rng);
            const auto p = prox(m, v, eta, kappa, box, 0);
            const double best_prox = prox_objective(m, p, v, eta, kappa);
            double best = 1e300;
            auto cand = v;
            const int k = 300;
            for (int i = 0; i <= k; ++i) {
                for (int j = 0; j <= k; ++j) {
                    cand.at(0, 0) = lo + (hi - lo) * i / k;
                    cand.at(0, 1) = lo + (hi - lo) * j / k;
                    best = std::min(best, prox_objective(m, cand, v, eta, kappa));
                }
            }
            CHECK(best_prox <= best + 1e-9);
        }
    }
}

TEST_CASE("prox is nonexpansive")
{
    std::mt19937_64 rng(23);
    const auto g = GridSpec::rect(3, 2, 1.0, 0.5);
    const TimeGrid t{0.8, 4};
    const auto box = BoxBounds::constant(-0.7, 1.2, -1.0, 0.3);
    for (auto m : kModes) {
        for (int s = 0; s < 100; ++s) {
            const auto a = random_field(g, t, 1.5, rng);
            const auto b = random_field(g, t, 1.5, rng);
            for (int c = 0; c < 2; ++c) {
                const auto pa = prox(m, a, 0.9, 0.4, box, c);
                const auto pb = prox(m, b, 0.9, 0.4, box, c);
                CHECK(norm(pa - pb) <= norm(a - b) + 1e-10);
            }
        }
    }
}

TEST_CASE("zero-slice law at the threshold")
{
    std::mt19937_64 rng(29);
    const auto g = GridSpec::line(3, 1.2);
    const TimeGrid t{0.9, 3};
    const auto box = BoxBounds::constant(-5.0, 5.0, -5.0, 5.0);
    const double eta = 0.8;
    const double kappa = 0.6;
    for (auto m : kModes) {
        for (int s = 0; s < 200; ++s) {
            auto v = random_field(g, t, 1.0, rng);
            const auto norms = mode_norms(m, v);
            const auto layout = SliceLayout::of(m, g, t);
            const double factor = (s % 2 == 0) ? 1.0 - 1e-9 : 1.0 + 1e-9;
            for (int sl = 0; sl < layout.count; ++sl) {
                for (int j = 0; j < layout.length; ++j) {
                    v.values()[layout.index(sl, j)] *= factor * eta * kappa / norms[sl];
                }
            }
            const auto p = prox(m, v, eta, kappa, box, 0);
            const auto pn = mode_norms(m, p);
            const auto vn = mode_norms(m, v);
            for (int sl = 0; sl < layout.count; ++sl) {
                CHECK((pn[sl] == 0.0) == (vn[sl] <= eta * kappa));
            }
        }
    }
}

TEST_CASE("prox output is a fixed point with the selected subgradient")
{
    std::mt19937_64 rng(31);
    const auto g = GridSpec::line(4, 1.0);
    const TimeGrid t{1.0, 5};
    const auto box = BoxBounds::constant(-0.6, 0.9, -1.0, 1.0);
    const double eta = 0.7;
    const double kappa = 0.5;
    for (auto m : kModes) {
        for (int s = 0; s < 50; ++s) {
            ControlPair v{random_field(g, t, 1.0, rng), random_field(g, t, 1.0, rng)};
            const auto u = prox(m, v, eta, kappa, box);
            auto d = v;
            d *= -1.0 / eta;
            const auto lam = select_subgradient(m, u, d, kappa);
            auto shifted = lam;
            shifted *= -eta * kappa;
            shifted += v;
            const auto back = project_box(shifted, box);
            CHECK((u - back).max_abs() <= 1e-8);
            for (int c = 0; c < 2; ++c) {
                for (double n : mode_norms(m, lam[c])) CHECK(n <= 1.0 + 1e-10);
            }
        }
    }
}

TEST_CASE("group modes collapse to the pointwise prox on one-element slices")
{
    std::mt19937_64 rng(37);
    const auto box = BoxBounds::constant(-1.0, 1.5, -1.0, 1.5);
    const auto unit = GridSpec::line(1, 1.0);
    const auto v = random_field(unit, TimeGrid{2.0, 7}, 1.5, rng);
    CHECK(norm(prox(SparsityMode::TimeT, v, 0.6, 0.9, box, 0) - prox(SparsityMode::FullQ, v, 0.6, 0.9, box, 0)) ==
          0.0);
    const auto w = random_field(GridSpec::rect(3, 3, 3.0, 3.0), TimeGrid{1.0, 1}, 1.5, rng);
    CHECK(norm(prox(SparsityMode::SpaceOmega, w, 0.6, 0.9, box, 0) -
               prox(SparsityMode::FullQ, w, 0.6, 0.9, box, 0)) == 0.0);
}

TEST_CASE("subgradient selection")
{
    const auto g = GridSpec::line(3, 1.0);
    const TimeGrid t{1.0, 2};
    auto u = ControlPair::zeros(g, t);
    auto d = ControlPair::zeros(g, t);
    for (auto m : kModes) CHECK(select_subgradient(m, u, d, 1.0).max_abs() == 0.0);

    u.u1.at(0, 1) = 0.4;
    u.u2.at(1, 2) = -0.1;
    d.u2.at(0, 0) = 0.3;
    d.u2.at(0, 1) = -5.0;
    const auto lam = select_subgradient(SparsityMode::FullQ, u, d, 0.5);
    CHECK(lam.u1.at(0, 1) == 1.0);
    CHECK(lam.u2.at(1, 2) == -1.0);
    CHECK(lam.u2.at(0, 0) == doctest::Approx(-0.6));
    CHECK(lam.u2.at(0, 1) == 1.0);

    const auto lt = select_subgradient(SparsityMode::TimeT, u, d, 0.5);
    CHECK(slice_norms(lt.u1, SliceDirection::Time)[0] == doctest::Approx(1.0));
    CHECK(slice_norms(lt.u2, SliceDirection::Time)[0] == doctest::Approx(1.0));
    CHECK(lt.u2.at(0, 1) > 0.0);
    CHECK_THROWS_AS(select_subgradient(SparsityMode::TimeT, u, d, 0.0), InvalidArgument);
}

TEST_CASE("certificates")
{
    const auto g = GridSpec::line(2, 1.0);
    const TimeGrid t{1.0, 3};
    const auto box = BoxBounds::constant(-1.0, 1.0, -1.0, 1.0);
    auto d = ControlPair::zeros(g, t);
    for (auto m : kModes) {
        const auto r = certificate(m, d, box, 1e-3);
        CHECK(r.flagged_count(0) == static_cast<int>(r.flagged1.size()));
        CHECK(r.flagged_count(1) == static_cast<int>(r.flagged2.size()));
    }
    d.u1.at(1, 0) = 2.0;
    const auto r = certificate(SparsityMode::TimeT, d, box, 1e-30);
    CHECK(r.flagged1 == std::vector<char>{1, 0, 1});
    CHECK(r.flagged_count(1) == 3);

    CHECK_THROWS_AS(certificate(SparsityMode::TimeT, d, BoxBounds::constant(0.0, 1.0, -1.0, 1.0), 1.0),
                    BoundsNotSigned);
    CHECK_THROWS_AS(certificate(SparsityMode::TimeT, d,
                                BoxBounds::per_entry({-1.0, -1.0}, {1.0, 1.0}, {-1.0}, {1.0}), 1.0),
                    BoundsNotSigned);

    std::ostringstream os;
    write_certificate_csv(os, certificate(SparsityMode::TimeT, d, box, 0.5));
    CHECK(os.str().rfind("slice,t,norm_d1,norm_d2,flag1,flag2,kappa\n0,", 0) == 0);
    std::ostringstream os2;
    write_certificate_csv(os2, certificate(SparsityMode::SpaceOmega, d, box, 0.5));
    CHECK(os2.str().rfind("slice,x,norm_d1", 0) == 0);
}
