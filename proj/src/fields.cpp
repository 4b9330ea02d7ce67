#include "tsc/fields.hpp"

#include "tsc/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

namespace tsc {

GridSpec GridSpec::line(int cells, double length)
{
    GridSpec g;
    g.dim = 1;
    g.n = {cells, 1};
    g.length = {length, 1.0};
    g.validate();
    return g;
}

GridSpec GridSpec::rect(int nx, int ny, double lx, double ly)
{
    GridSpec g;
    g.dim = 2;
    g.n = {nx, ny};
    g.length = {lx, ly};
    g.validate();
    return g;
}

double GridSpec::cell_volume() const noexcept
{
    double v = spacing(0);
    if (dim == 2) {
        v *= spacing(1);
    }
    return v;
}

double GridSpec::volume() const noexcept { return dim == 1 ? length[0] : length[0] * length[1]; }

std::array<double, 2> GridSpec::center(int cell) const noexcept
{
    const int i = cell % n[0];
    const int j = cell / n[0];
    const double x = (i + 0.5) * spacing(0);
    const double y = dim == 2 ? (j + 0.5) * spacing(1) : 0.0;
    return {x, y};
}

void GridSpec::validate() const
{
    if (dim != 1 && dim != 2) {
        throw InvalidArgument("grid dimension must be 1 or 2");
    }
    for (int a = 0; a < dim; ++a) {
        if (n[a] < 1) {
            throw InvalidArgument("grid needs at least one cell per axis");
        }
        if (!(length[a] > 0.0) || !std::isfinite(length[a])) {
            throw InvalidArgument("grid length must be positive and finite");
        }
    }
}

void TimeGrid::validate() const
{
    if (!(t_final > 0.0) || !std::isfinite(t_final)) {
        throw InvalidArgument("final time must be positive and finite");
    }
    if (n_steps < 1) {
        throw InvalidArgument("time grid needs at least one step");
    }
}

// ---------------------------------------------------------------------------

Field::Field(GridSpec grid, double value) : grid_(grid), values_(grid.cells(), value) {}

Field::Field(GridSpec grid, std::vector<double> values) : grid_(grid), values_(std::move(values))
{
    if (values_.size() != static_cast<std::size_t>(grid_.cells())) {
        throw ShapeMismatch("field value count does not match grid cell count");
    }
}

double Field::min() const { return *std::min_element(values_.begin(), values_.end()); }
double Field::max() const { return *std::max_element(values_.begin(), values_.end()); }

bool Field::all_finite() const noexcept
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

Field& Field::operator+=(const Field& other)
{
    if (!(grid_ == other.grid_)) {
        throw ShapeMismatch("field grids differ");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i] += other.values_[i];
    }
    return *this;
}

Field& Field::operator-=(const Field& other)
{
    if (!(grid_ == other.grid_)) {
        throw ShapeMismatch("field grids differ");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i] -= other.values_[i];
    }
    return *this;
}

Field& Field::operator*=(double s) noexcept
{
    for (double& v : values_) {
        v *= s;
    }
    return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

// ---------------------------------------------------------------------------

SpaceTimeField::SpaceTimeField(GridSpec grid, TimeGrid time, TimeLayout layout, double value)
    : grid_(grid), time_(time), layout_(layout),
      slices_(layout == TimeLayout::Nodes ? time.n_steps + 1 : time.n_steps),
      values_(static_cast<std::size_t>(slices_) * grid.cells(), value)
{
}

std::span<double> SpaceTimeField::slice(int k) noexcept
{
    return std::span<double>(values_).subspan(static_cast<std::size_t>(k) * cells(), cells());
}

std::span<const double> SpaceTimeField::slice(int k) const noexcept
{
    return std::span<const double>(values_).subspan(static_cast<std::size_t>(k) * cells(), cells());
}

Field SpaceTimeField::snapshot(int k) const
{
    auto s = slice(k);
    return Field(grid_, std::vector<double>(s.begin(), s.end()));
}

void SpaceTimeField::set_snapshot(int k, const Field& f)
{
    if (!(f.grid() == grid_)) {
        throw ShapeMismatch("snapshot grid differs from space-time field grid");
    }
    std::copy(f.values().begin(), f.values().end(), slice(k).begin());
}

double SpaceTimeField::slice_time(int k) const noexcept
{
    return layout_ == TimeLayout::Nodes ? time_.time(k) : time_.time(k + 1);
}

double SpaceTimeField::slice_weight(int k) const noexcept
{
    if (layout_ == TimeLayout::Nodes && k == 0) {
        return 0.0;
    }
    return time_.tau();
}

bool SpaceTimeField::same_shape(const SpaceTimeField& other) const noexcept
{
    return grid_ == other.grid_ && time_ == other.time_ && layout_ == other.layout_;
}

bool SpaceTimeField::all_finite() const noexcept
{
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double SpaceTimeField::max_abs() const noexcept
{
    double m = 0.0;
    for (double v : values_) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

SpaceTimeField& SpaceTimeField::operator+=(const SpaceTimeField& other)
{
    if (!same_shape(other)) {
        throw ShapeMismatch("space-time field shapes differ");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i] += other.values_[i];
    }
    return *this;
}

SpaceTimeField& SpaceTimeField::operator-=(const SpaceTimeField& other)
{
    if (!same_shape(other)) {
        throw ShapeMismatch("space-time field shapes differ");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        values_[i] -= other.values_[i];
    }
    return *this;
}

SpaceTimeField& SpaceTimeField::operator*=(double s) noexcept
{
    for (double& v : values_) {
        v *= s;
    }
    return *this;
}

SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b) { return a += b; }
SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b) { return a -= b; }
SpaceTimeField operator*(double s, SpaceTimeField a) { return a *= s; }

// ---------------------------------------------------------------------------

void apply_laplacian(const GridSpec& grid, std::span<const double> in, std::span<double> out)
{
    const int nx = grid.n[0];
    const double ihx2 = 1.0 / (grid.spacing(0) * grid.spacing(0));
    if (grid.dim == 1) {
        if (nx == 1) {
            out[0] = 0.0;
            return;
        }
        out[0] = (in[1] - in[0]) * ihx2;
        for (int i = 1; i < nx - 1; ++i) {
            out[i] = (in[i + 1] - 2.0 * in[i] + in[i - 1]) * ihx2;
        }
        out[nx - 1] = (in[nx - 2] - in[nx - 1]) * ihx2;
        return;
    }
    const int ny = grid.n[1];
    const double ihy2 = 1.0 / (grid.spacing(1) * grid.spacing(1));
    // Mirrored ghosts: a missing neighbour contributes a zero flux.
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int c = j * nx + i;
            const double v = in[c];
            double acc = 0.0;
            if (i > 0) acc += (in[c - 1] - v) * ihx2;
            if (i < nx - 1) acc += (in[c + 1] - v) * ihx2;
            if (j > 0) acc += (in[c - nx] - v) * ihy2;
            if (j < ny - 1) acc += (in[c + nx] - v) * ihy2;
            out[c] = acc;
        }
    }
}

Field laplacian_neumann(const Field& f)
{
    Field out(f.grid());
    apply_laplacian(f.grid(), f.values(), out.values());
    return out;
}

double integral(const GridSpec& grid, std::span<const double> values)
{
    double s = 0.0;
    for (double v : values) {
        s += v;
    }
    return s * grid.cell_volume();
}

double mean(const Field& f) { return integral(f.grid(), f.values()) / f.grid().volume(); }

double inner(const Field& a, const Field& b)
{
    if (!(a.grid() == b.grid())) {
        throw ShapeMismatch("inner: grids differ");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s * a.grid().cell_volume();
}

double inner(const SpaceTimeField& a, const SpaceTimeField& b)
{
    if (!a.same_shape(b)) {
        throw ShapeMismatch("inner: space-time shapes differ");
    }
    double total = 0.0;
    for (int k = 0; k < a.slices(); ++k) {
        const double w = a.slice_weight(k);
        if (w == 0.0) {
            continue;
        }
        auto sa = a.slice(k);
        auto sb = b.slice(k);
        double s = 0.0;
        for (std::size_t i = 0; i < sa.size(); ++i) {
            s += sa[i] * sb[i];
        }
        total += w * s;
    }
    return total * a.grid().cell_volume();
}

double norm(const Field& f) { return std::sqrt(inner(f, f)); }
double norm(const SpaceTimeField& f) { return std::sqrt(inner(f, f)); }

std::vector<double> slice_norms(const SpaceTimeField& u, SliceDirection direction)
{
    const double vol = u.grid().cell_volume();
    if (direction == SliceDirection::Time) {
        std::vector<double> out(u.slices());
        for (int k = 0; k < u.slices(); ++k) {
            double s = 0.0;
            for (double v : u.slice(k)) {
                s += v * v;
            }
            out[k] = std::sqrt(vol * s);
        }
        return out;
    }
    std::vector<double> acc(u.cells(), 0.0);
    for (int k = 0; k < u.slices(); ++k) {
        const double w = u.slice_weight(k);
        auto s = u.slice(k);
        for (int c = 0; c < u.cells(); ++c) {
            acc[c] += w * s[c] * s[c];
        }
    }
    for (double& v : acc) {
        v = std::sqrt(v);
    }
    return acc;
}

std::string format_real(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

namespace {

void write_header(std::ostream& os, const GridSpec& grid, const std::string& name, bool with_time)
{
    if (with_time) {
        os << "t,";
    }
    os << "x,";
    if (grid.dim == 2) {
        os << "y,";
    }
    os << name << '\n';
}

void write_row(std::ostream& os, const GridSpec& grid, int cell, double value, const double* t)
{
    const auto c = grid.center(cell);
    if (t != nullptr) {
        os << format_real(*t) << ',';
    }
    os << format_real(c[0]) << ',';
    if (grid.dim == 2) {
        os << format_real(c[1]) << ',';
    }
    os << format_real(value) << '\n';
}

} // namespace

void write_csv(std::ostream& os, const SpaceTimeField& f, const std::string& name)
{
    write_header(os, f.grid(), name, true);
    for (int k = 0; k < f.slices(); ++k) {
        const double t = f.slice_time(k);
        auto s = f.slice(k);
        for (int c = 0; c < f.cells(); ++c) {
            write_row(os, f.grid(), c, s[c], &t);
        }
    }
}

void write_csv(std::ostream& os, const Field& f, const std::string& name)
{
    write_header(os, f.grid(), name, false);
    for (int c = 0; c < static_cast<int>(f.size()); ++c) {
        write_row(os, f.grid(), c, f[c], nullptr);
    }
}

} // namespace tsc
