#include "tsc/model.hpp"

#include "tsc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace tsc {

std::vector<Violation> check_params(const ModelParams& p)
{
    std::vector<Violation> out;
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            out.push_back({std::string(name) + " positive", std::string(name) + " must be positive and finite"});
        }
    };
    auto nonnegative = [&](double v, const char* name) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            out.push_back(
                {std::string(name) + " nonnegative", std::string(name) + " must be nonnegative and finite"});
        }
    };
    positive(p.alpha, "alpha");
    positive(p.beta, "beta");
    positive(p.nu, "nu");
    positive(p.kappa, "kappa");
    nonnegative(p.chi, "chi");
    nonnegative(p.p_rate, "p_rate");
    nonnegative(p.a_rate, "a_rate");
    nonnegative(p.b_rate, "b_rate");
    nonnegative(p.e_rate, "e_rate");
    nonnegative(p.sigma_s, "sigma_s");
    nonnegative(p.beta1, "beta1");
    nonnegative(p.beta2, "beta2");
    return out;
}

void ModelParams::validate() const
{
    const auto v = check_params(*this);
    if (!v.empty()) {
        throw InvalidArgument(v.front().message);
    }
}

// ---------------------------------------------------------------------------

Potential Potential::regular() { return Potential{}; }

Potential Potential::logarithmic(double k)
{
    if (!(k > 1.0) || !std::isfinite(k)) {
        throw InvalidArgument("logarithmic potential needs k > 1");
    }
    Potential p;
    p.kind_ = PotentialKind::Logarithmic;
    p.k_ = k;
    p.r_minus_ = -1.0;
    p.r_plus_ = 1.0;
    return p;
}

Potential Potential::custom(Split split, double r_minus, double r_plus)
{
    if (!(r_minus < 0.0 && 0.0 < r_plus)) {
        throw InvalidArgument("custom potential needs r- < 0 < r+");
    }
    if (!split.f1 || !split.f1d || !split.f1dd || !split.f1ddd || !split.f2 || !split.f2d || !split.f2dd ||
        !split.f2ddd) {
        throw InvalidArgument("custom potential needs all split evaluators");
    }
    Potential p;
    p.kind_ = PotentialKind::CustomSplit;
    p.r_minus_ = r_minus;
    p.r_plus_ = r_plus;
    p.split_ = std::move(split);
    return p;
}

std::string Potential::name() const
{
    switch (kind_) {
    case PotentialKind::Regular:
        return "regular";
    case PotentialKind::Logarithmic:
        return "logarithmic";
    case PotentialKind::CustomSplit:
        return "custom";
    }
    return "unknown";
}

bool Potential::singular() const noexcept { return std::isfinite(r_minus_) || std::isfinite(r_plus_); }

Potential Potential::with_margin(double margin) const
{
    Potential p = *this;
    p.margin_ = margin;
    return p;
}

bool Potential::admissible(double r) const noexcept
{
    return std::isfinite(r) && r > r_minus_ + margin_ && r < r_plus_ - margin_;
}

double Potential::boundary_distance(double r) const noexcept { return std::min(r - r_minus_, r_plus_ - r); }

double Potential::clamp_arg(double r, bool& clamped) const
{
    clamped = false;
    if (!std::isfinite(r)) {
        throw SingularDomain("potential evaluated at a non-finite argument");
    }
    if (!singular()) {
        return r;
    }
    if (r <= r_minus_ || r >= r_plus_) {
        throw SingularDomain("potential evaluated outside (r-, r+) at r = " + format_real(r));
    }
    const double lo = r_minus_ + margin_;
    const double hi = r_plus_ - margin_;
    if (r < lo) {
        clamped = true;
        return lo;
    }
    if (r > hi) {
        clamped = true;
        return hi;
    }
    return r;
}

namespace {

struct Components {
    double f1, f1d, f1dd, f1ddd;
    double f2, f2d, f2dd, f2ddd;
};

Components regular_components(double r)
{
    const double r2 = r * r;
    // F1 = r^4/4 + r^2/2 is convex with F1(0) = 0; F2 = 1/4 - r^2 completes F.
    return {0.25 * r2 * r2 + 0.5 * r2, r2 * r + r, 3.0 * r2 + 1.0, 6.0 * r,
            0.25 - r2,                 -2.0 * r,   -2.0,           0.0};
}

Components log_components(double r, double k)
{
    const double lp = std::log1p(r);
    const double lm = std::log1p(-r);
    const double one_m_r2 = (1.0 - r) * (1.0 + r);
    return {(1.0 + r) * lp + (1.0 - r) * lm,
            lp - lm,
            2.0 / one_m_r2,
            4.0 * r / (one_m_r2 * one_m_r2),
            -k * r * r,
            -2.0 * k * r,
            -2.0 * k,
            0.0};
}

} // namespace

PotentialValue Potential::eval(double r) const
{
    bool clamped = false;
    const double x = clamp_arg(r, clamped);
    Components c{};
    switch (kind_) {
    case PotentialKind::Regular:
        c = regular_components(x);
        break;
    case PotentialKind::Logarithmic:
        c = log_components(x, k_);
        break;
    case PotentialKind::CustomSplit:
        c = {split_.f1(x), split_.f1d(x), split_.f1dd(x), split_.f1ddd(x),
             split_.f2(x), split_.f2d(x), split_.f2dd(x), split_.f2ddd(x)};
        break;
    }
    return {c.f1 + c.f2, c.f1d + c.f2d, c.f1dd + c.f2dd, c.f1ddd + c.f2ddd, clamped};
}

SplitValue Potential::eval_split(double r) const
{
    bool clamped = false;
    const double x = clamp_arg(r, clamped);
    switch (kind_) {
    case PotentialKind::Regular: {
        const auto c = regular_components(x);
        return {c.f1d, c.f1dd, c.f2d, c.f2dd, clamped};
    }
    case PotentialKind::Logarithmic: {
        const auto c = log_components(x, k_);
        return {c.f1d, c.f1dd, c.f2d, c.f2dd, clamped};
    }
    case PotentialKind::CustomSplit:
        return {split_.f1d(x), split_.f1dd(x), split_.f2d(x), split_.f2dd(x), clamped};
    }
    return {};
}

double Potential::f1(double r) const
{
    bool clamped = false;
    const double x = clamp_arg(r, clamped);
    switch (kind_) {
    case PotentialKind::Regular:
        return regular_components(x).f1;
    case PotentialKind::Logarithmic:
        return log_components(x, k_).f1;
    case PotentialKind::CustomSplit:
        return split_.f1(x);
    }
    return 0.0;
}

double Potential::f2(double r) const
{
    bool clamped = false;
    const double x = clamp_arg(r, clamped);
    switch (kind_) {
    case PotentialKind::Regular:
        return regular_components(x).f2;
    case PotentialKind::Logarithmic:
        return log_components(x, k_).f2;
    case PotentialKind::CustomSplit:
        return split_.f2(x);
    }
    return 0.0;
}

double Potential::f1ddd(double r) const
{
    bool clamped = false;
    const double x = clamp_arg(r, clamped);
    switch (kind_) {
    case PotentialKind::Regular:
        return regular_components(x).f1ddd;
    case PotentialKind::Logarithmic:
        return log_components(x, k_).f1ddd;
    case PotentialKind::CustomSplit:
        return split_.f1ddd(x);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------

Interpolant Interpolant::smoothstep7()
{
    return custom("smoothstep7", [](double r) -> InterpolantValue {
        if (r <= -1.0) {
            return {0.0, 0.0, 0.0};
        }
        if (r >= 1.0) {
            return {1.0, 0.0, 0.0};
        }
        const double y = 0.5 * (r + 1.0);
        const double y2 = y * y;
        const double y3 = y2 * y;
        const double y4 = y2 * y2;
        const double om = 1.0 - y;
        const double h = y4 * (35.0 + y * (-84.0 + y * (70.0 - 20.0 * y)));
        // dh/dy = 140 y^3 (1-y)^3, d2h/dy2 = 420 y^2 (1-y)^2 (1-2y); dy/dr = 1/2.
        const double hd = 0.5 * 140.0 * y3 * om * om * om;
        const double hdd = 0.25 * 420.0 * y2 * om * om * (1.0 - 2.0 * y);
        return {h, hd, hdd};
    });
}

Interpolant Interpolant::custom(std::string name, Eval eval)
{
    if (!eval) {
        throw InvalidArgument("interpolant needs an evaluator");
    }
    Interpolant h;
    h.name_ = std::move(name);
    h.eval_ = std::move(eval);
    return h;
}

InterpolantValue Interpolant::eval(double r) const { return eval_(r); }

// ---------------------------------------------------------------------------

BoxBounds BoxBounds::constant(double lo1, double hi1, double lo2, double hi2)
{
    BoxBounds b;
    b.lo_[0] = {lo1};
    b.hi_[0] = {hi1};
    b.lo_[1] = {lo2};
    b.hi_[1] = {hi2};
    b.validate(1);
    return b;
}

BoxBounds BoxBounds::per_entry(std::vector<double> lo1, std::vector<double> hi1, std::vector<double> lo2,
                               std::vector<double> hi2)
{
    BoxBounds b;
    b.lo_[0] = std::move(lo1);
    b.hi_[0] = std::move(hi1);
    b.lo_[1] = std::move(lo2);
    b.hi_[1] = std::move(hi2);
    return b;
}

bool BoxBounds::is_constant() const noexcept
{
    for (int i = 0; i < 2; ++i) {
        if (lo_[i].size() != 1 || hi_[i].size() != 1) {
            return false;
        }
    }
    return true;
}

bool BoxBounds::zero_interior() const noexcept
{
    if (!is_constant()) {
        return false;
    }
    return lo_[0][0] < 0.0 && 0.0 < hi_[0][0] && lo_[1][0] < 0.0 && 0.0 < hi_[1][0];
}

void BoxBounds::validate(std::size_t entries) const
{
    for (int i = 0; i < 2; ++i) {
        const auto nl = lo_[i].size();
        const auto nh = hi_[i].size();
        if ((nl != 1 && nl != entries) || (nh != 1 && nh != entries)) {
            throw BadBounds("bound entry count does not match the control shape");
        }
        const std::size_t n = std::max(nl, nh);
        for (std::size_t e = 0; e < n; ++e) {
            const double l = lo(i, e);
            const double h = hi(i, e);
            if (std::isnan(l) || std::isnan(h) || l > h) {
                throw BadBounds("lower bound exceeds upper bound for control " + std::to_string(i + 1));
            }
        }
    }
}

// ---------------------------------------------------------------------------

bool ValidationReport::has(const std::string& code) const
{
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.code == code; });
}

ValidationReport validate_setup(const ModelParams& params, const Potential& pot, const StateTriple& init)
{
    ValidationReport report;
    report.violations = check_params(params);
    const auto& g = init.phi.grid();
    if (!(init.mu.grid() == g) || !(init.sigma.grid() == g)) {
        report.violations.push_back({"shared grid", "initial fields live on different grids"});
        return report;
    }
    if (!init.mu.all_finite() || !init.phi.all_finite() || !init.sigma.all_finite()) {
        report.violations.push_back({"finite initial data", "initial data contain non-finite values"});
        return report;
    }
    if (pot.singular()) {
        const double lo = init.phi.min();
        const double hi = init.phi.max();
        if (!(lo > pot.r_minus()) || !(hi < pot.r_plus())) {
            report.violations.push_back(
                {"initial separation", "phi0 must lie strictly inside (r-, r+); got [" + format_real(lo) + ", " +
                                           format_real(hi) + "]"});
        }
    }
    return report;
}

} // namespace tsc
