#include "tsc/sparsity.hpp"

#include "tsc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace tsc {

std::string_view to_string(SparsityMode mode) noexcept
{
    switch (mode) {
    case SparsityMode::None: return "none";
    case SparsityMode::FullQ: return "full";
    case SparsityMode::TimeT: return "time";
    case SparsityMode::SpaceOmega: return "space";
    }
    return "none";
}

SparsityMode parse_sparsity_mode(std::string_view name)
{
    if (name == "none" || name == "None") return SparsityMode::None;
    if (name == "full" || name == "FullQ") return SparsityMode::FullQ;
    if (name == "time" || name == "TimeT") return SparsityMode::TimeT;
    if (name == "space" || name == "SpaceOmega") return SparsityMode::SpaceOmega;
    throw InvalidArgument("unknown sparsity mode '" + std::string(name) + "'");
}

SliceLayout SliceLayout::of(SparsityMode mode, const GridSpec& grid, const TimeGrid& time)
{
    SliceLayout s;
    s.mode = mode;
    s.cells = grid.cells();
    const double vol = grid.cell_volume();
    const double tau = time.tau();
    switch (mode) {
    case SparsityMode::None:
    case SparsityMode::FullQ:
        s.count = time.n_steps * grid.cells();
        s.length = 1;
        s.weight = 1.0;
        s.measure = vol * tau;
        break;
    case SparsityMode::TimeT:
        s.count = time.n_steps;
        s.length = grid.cells();
        s.weight = vol;
        s.measure = tau;
        break;
    case SparsityMode::SpaceOmega:
        s.count = grid.cells();
        s.length = time.n_steps;
        s.weight = tau;
        s.measure = vol;
        break;
    }
    return s;
}

int SliceLayout::index(int slice, int j) const noexcept
{
    switch (mode) {
    case SparsityMode::TimeT: return slice * cells + j;
    case SparsityMode::SpaceOmega: return j * cells + slice;
    default: return slice;
    }
}

std::vector<double> mode_norms(SparsityMode mode, const SpaceTimeField& u)
{
    switch (mode) {
    case SparsityMode::TimeT: return slice_norms(u, SliceDirection::Time);
    case SparsityMode::SpaceOmega: return slice_norms(u, SliceDirection::Space);
    default: break;
    }
    std::vector<double> out(u.values().size());
    std::transform(u.values().begin(), u.values().end(), out.begin(), [](double v) { return std::abs(v); });
    return out;
}

double eval_g(SparsityMode mode, const SpaceTimeField& u)
{
    if (mode == SparsityMode::None) {
        return 0.0;
    }
    const auto layout = SliceLayout::of(mode, u.grid(), u.time());
    double sum = 0.0;
    for (double n : mode_norms(mode, u)) {
        sum += n;
    }
    return layout.measure * sum;
}

double eval_g(SparsityMode mode, const ControlPair& u) { return eval_g(mode, u.u1) + eval_g(mode, u.u2); }

double project_box(double s, double lo, double hi)
{
    if (!(lo <= hi)) {
        throw BadBounds("project_box: lower bound exceeds upper bound");
    }
    return std::min(hi, std::max(lo, s));
}

Field project_box(Field f, double lo, double hi)
{
    for (auto& v : f.values()) {
        v = project_box(v, lo, hi);
    }
    return f;
}

SpaceTimeField project_box(SpaceTimeField u, const BoxBounds& bounds, int control)
{
    auto v = u.values();
    bounds.validate(v.size());
    for (std::size_t e = 0; e < v.size(); ++e) {
        v[e] = std::min(bounds.hi(control, e), std::max(bounds.lo(control, e), v[e]));
    }
    return u;
}

ControlPair project_box(ControlPair u, const BoxBounds& bounds)
{
    u.u1 = project_box(std::move(u.u1), bounds, 0);
    u.u2 = project_box(std::move(u.u2), bounds, 1);
    return u;
}

double prox_scalar(double v, double lo, double hi, double t)
{
    const double soft = std::copysign(std::max(std::abs(v) - t, 0.0), v);
    return project_box(soft, lo, hi);
}

void prox_group(std::span<const double> v, std::span<const double> lo, std::span<const double> hi, double weight,
                double t, std::span<double> out)
{
    const std::size_t n = v.size();
    double vv = 0.0;
    for (double x : v) {
        vv += x * x;
    }
    const double vnorm = std::sqrt(weight * vv);
    if (vnorm <= t) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    if (n == 1) {
        out[0] = prox_scalar(v[0], lo[0], hi[0], weight == 1.0 ? t : t / std::sqrt(weight));
        return;
    }
    auto shrink = [&](double theta) {
        const double s = theta / (theta + t);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            out[j] = std::min(hi[j], std::max(lo[j], s * v[j]));
            acc += out[j] * out[j];
        }
        return std::sqrt(weight * acc);
    };
    if (t == 0.0) {
        shrink(1.0);
        return;
    }
    // theta -> ||u(theta)|| / theta is strictly decreasing, so the crossing is unique.
    double a = 0.0;
    double b = vnorm;
    const double tol = 1e-12 * vnorm;
    int it = 0;
    for (; it < 200 && b - a > tol; ++it) {
        const double mid = 0.5 * (a + b);
        if (shrink(mid) > mid) {
            a = mid;
        } else {
            b = mid;
        }
    }
    if (b - a > tol) {
        throw BisectionFailure("group prox: fixed point not bracketed to tolerance");
    }
    shrink(0.5 * (a + b));
}

namespace {

void require_signed_bounds(const BoxBounds& bounds, int control, std::size_t entries)
{
    for (std::size_t e = 0; e < entries; ++e) {
        if (!(bounds.lo(control, e) < 0.0 && 0.0 < bounds.hi(control, e))) {
            throw BadBounds("sparsity prox requires lo < 0 < hi");
        }
    }
}

} // namespace

SpaceTimeField prox(SparsityMode mode, const SpaceTimeField& v, double eta, double kappa, const BoxBounds& bounds,
                    int control)
{
    if (!(eta > 0.0) || !(kappa >= 0.0)) {
        throw InvalidArgument("prox: need eta > 0 and kappa >= 0");
    }
    const std::size_t size = v.values().size();
    bounds.validate(size);
    if (mode == SparsityMode::None) {
        return project_box(v, bounds, control);
    }
    require_signed_bounds(bounds, control, size);

    SpaceTimeField out = v;
    auto src = v.values();
    auto dst = out.values();
    const double t = eta * kappa;
    if (mode == SparsityMode::FullQ) {
        for (std::size_t e = 0; e < size; ++e) {
            dst[e] = prox_scalar(src[e], bounds.lo(control, e), bounds.hi(control, e), t);
        }
        return out;
    }

    const auto layout = SliceLayout::of(mode, v.grid(), v.time());
    std::vector<double> vs(layout.length), lo(layout.length), hi(layout.length), us(layout.length);
    for (int s = 0; s < layout.count; ++s) {
        for (int j = 0; j < layout.length; ++j) {
            const auto e = static_cast<std::size_t>(layout.index(s, j));
            vs[j] = src[e];
            lo[j] = bounds.lo(control, e);
            hi[j] = bounds.hi(control, e);
        }
        prox_group(vs, lo, hi, layout.weight, t, us);
        for (int j = 0; j < layout.length; ++j) {
            dst[layout.index(s, j)] = us[j];
        }
    }
    return out;
}

ControlPair prox(SparsityMode mode, const ControlPair& v, double eta, double kappa, const BoxBounds& bounds)
{
    return {prox(mode, v.u1, eta, kappa, bounds, 0), prox(mode, v.u2, eta, kappa, bounds, 1)};
}

namespace {

SpaceTimeField select_one(SparsityMode mode, const SpaceTimeField& u, const SpaceTimeField& d, double kappa)
{
    if (!u.same_shape(d)) {
        throw ShapeMismatch("select_subgradient: control and sensitivity shapes differ");
    }
    SpaceTimeField lam = u;
    auto l = lam.values();
    auto uv = u.values();
    auto dv = d.values();
    if (mode == SparsityMode::None) {
        std::fill(l.begin(), l.end(), 0.0);
        return lam;
    }
    if (mode == SparsityMode::FullQ) {
        for (std::size_t e = 0; e < l.size(); ++e) {
            if (uv[e] > 0.0) {
                l[e] = 1.0;
            } else if (uv[e] < 0.0) {
                l[e] = -1.0;
            } else {
                l[e] = std::clamp(-dv[e] / kappa, -1.0, 1.0);
            }
        }
        return lam;
    }
    const auto layout = SliceLayout::of(mode, u.grid(), u.time());
    const auto un = mode_norms(mode, u);
    const auto dn = mode_norms(mode, d);
    for (int s = 0; s < layout.count; ++s) {
        double scale;
        const double* from;
        if (un[s] > 0.0) {
            scale = 1.0 / un[s];
            from = uv.data();
        } else {
            // Ball projection of -d/kappa.
            scale = -1.0 / std::max(kappa, dn[s]);
            from = dv.data();
        }
        for (int j = 0; j < layout.length; ++j) {
            const int e = layout.index(s, j);
            l[e] = scale * from[e];
        }
    }
    return lam;
}

} // namespace

SubgradientPair select_subgradient(SparsityMode mode, const ControlPair& u, const ControlPair& d, double kappa)
{
    if (mode != SparsityMode::None && !(kappa > 0.0)) {
        throw InvalidArgument("select_subgradient: kappa must be positive");
    }
    return {select_one(mode, u.u1, d.u1, kappa), select_one(mode, u.u2, d.u2, kappa)};
}

int CertificateReport::flagged_count(int control) const noexcept
{
    const auto& f = control == 0 ? flagged1 : flagged2;
    return static_cast<int>(std::count(f.begin(), f.end(), char{1}));
}

CertificateReport certificate(SparsityMode mode, const ControlPair& d, const BoxBounds& bounds, double kappa)
{
    if (mode == SparsityMode::None) {
        throw InvalidArgument("certificate: a sparsity mode is required");
    }
    if (!bounds.is_constant() || !bounds.zero_interior()) {
        throw BoundsNotSigned("certificate: needs constant bounds with lo < 0 < hi");
    }
    CertificateReport r;
    r.mode = mode;
    r.kappa = kappa;
    r.d = d;
    r.norms1 = mode_norms(mode, d.u1);
    r.norms2 = mode_norms(mode, d.u2);
    for (double n : r.norms1) r.flagged1.push_back(n <= kappa ? 1 : 0);
    for (double n : r.norms2) r.flagged2.push_back(n <= kappa ? 1 : 0);
    return r;
}

CertificateReport certificate(SparsityMode mode, const Model& model, const AdjointTriple& adjoint,
                              const Trajectory& base, const BoxBounds& bounds, double kappa)
{
    return certificate(mode, control_sensitivity(model, adjoint, base), bounds, kappa);
}

void write_certificate_csv(std::ostream& os, const CertificateReport& r)
{
    const auto& grid = r.d.u1.grid();
    const auto& time = r.d.u1.time();
    const bool two_d = grid.dim == 2;
    os << "slice";
    if (r.mode != SparsityMode::SpaceOmega) os << ",t";
    if (r.mode != SparsityMode::TimeT) os << (two_d ? ",x,y" : ",x");
    os << ",norm_d1,norm_d2,flag1,flag2,kappa\n";
    const auto layout = SliceLayout::of(r.mode, grid, time);
    for (int s = 0; s < layout.count; ++s) {
        os << s;
        if (r.mode == SparsityMode::TimeT) {
            os << ',' << format_real(r.d.u1.slice_time(s));
        } else {
            const int k = r.mode == SparsityMode::FullQ ? s / grid.cells() : -1;
            const int c = r.mode == SparsityMode::FullQ ? s % grid.cells() : s;
            if (k >= 0) os << ',' << format_real(r.d.u1.slice_time(k));
            const auto x = grid.center(c);
            os << ',' << format_real(x[0]);
            if (two_d) os << ',' << format_real(x[1]);
        }
        os << ',' << format_real(r.norms1[s]) << ',' << format_real(r.norms2[s]) << ',' << int(r.flagged1[s]) << ','
           << int(r.flagged2[s]) << ',' << format_real(r.kappa) << '\n';
    }
}

} // namespace tsc
