#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace tsc {

/// Uniform cell-centered grid on [0, Lx] (x [0, Ly]) with homogeneous Neumann boundaries.
struct GridSpec {
    int dim = 1;
    std::array<int, 2> n{1, 1};
    std::array<double, 2> length{1.0, 1.0};

    static GridSpec line(int cells, double length);
    static GridSpec rect(int nx, int ny, double lx, double ly);

    int cells() const noexcept { return dim == 1 ? n[0] : n[0] * n[1]; }
    double spacing(int axis) const noexcept { return length[axis] / n[axis]; }
    double cell_volume() const noexcept;
    double volume() const noexcept;
    /// Cell center; the second coordinate is 0 in 1D.
    std::array<double, 2> center(int cell) const noexcept;

    /// Throws InvalidArgument unless dim in {1,2}, n >= 1 and length > 0.
    void validate() const;

    bool operator==(const GridSpec&) const = default;
};

/// Uniform time grid {0, tau, ..., T}.
struct TimeGrid {
    double t_final = 1.0;
    int n_steps = 1;

    double tau() const noexcept { return t_final / n_steps; }
    double time(int k) const noexcept { return k * tau(); }
    void validate() const;

    bool operator==(const TimeGrid&) const = default;
};

class Field {
public:
    Field() = default;
    explicit Field(GridSpec grid, double value = 0.0);
    Field(GridSpec grid, std::vector<double> values);

    const GridSpec& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    double min() const;
    double max() const;
    bool all_finite() const noexcept;

    Field& operator+=(const Field& other);
    Field& operator-=(const Field& other);
    Field& operator*=(double s) noexcept;

private:
    GridSpec grid_;
    std::vector<double> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

/// Nodes: states sampled at t_0..t_N (N+1 slices).
/// Intervals: piecewise constant on (t_n, t_{n+1}] (N slices), used for controls.
enum class TimeLayout { Nodes, Intervals };

class SpaceTimeField {
public:
    SpaceTimeField() = default;
    SpaceTimeField(GridSpec grid, TimeGrid time, TimeLayout layout, double value = 0.0);

    static SpaceTimeField nodes(GridSpec grid, TimeGrid time, double value = 0.0)
    {
        return {grid, time, TimeLayout::Nodes, value};
    }
    static SpaceTimeField intervals(GridSpec grid, TimeGrid time, double value = 0.0)
    {
        return {grid, time, TimeLayout::Intervals, value};
    }

    const GridSpec& grid() const noexcept { return grid_; }
    const TimeGrid& time() const noexcept { return time_; }
    TimeLayout layout() const noexcept { return layout_; }
    int slices() const noexcept { return slices_; }
    int cells() const noexcept { return grid_.cells(); }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<double> slice(int k) noexcept;
    std::span<const double> slice(int k) const noexcept;
    Field snapshot(int k) const;
    void set_snapshot(int k, const Field& f);
    double& at(int k, int cell) noexcept { return values_[static_cast<std::size_t>(k) * cells() + cell]; }
    double at(int k, int cell) const noexcept { return values_[static_cast<std::size_t>(k) * cells() + cell]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    /// Time coordinate attached to slice k (node time, or the right end of the interval).
    double slice_time(int k) const noexcept;
    /// Time weight of slice k in space-time quadrature (0 for the initial node).
    double slice_weight(int k) const noexcept;

    bool same_shape(const SpaceTimeField& other) const noexcept;
    bool all_finite() const noexcept;
    double max_abs() const noexcept;

    SpaceTimeField& operator+=(const SpaceTimeField& other);
    SpaceTimeField& operator-=(const SpaceTimeField& other);
    SpaceTimeField& operator*=(double s) noexcept;

private:
    GridSpec grid_;
    TimeGrid time_;
    TimeLayout layout_ = TimeLayout::Nodes;
    int slices_ = 0;
    std::vector<double> values_;
};

SpaceTimeField operator+(SpaceTimeField a, const SpaceTimeField& b);
SpaceTimeField operator-(SpaceTimeField a, const SpaceTimeField& b);
SpaceTimeField operator*(double s, SpaceTimeField a);

struct StateTriple {
    Field mu;
    Field phi;
    Field sigma;
};

/// Time-indexed (mu, phi, sigma) on the nodes t_0..t_N.
struct Trajectory {
    SpaceTimeField mu;
    SpaceTimeField phi;
    SpaceTimeField sigma;

    StateTriple at(int k) const { return {mu.snapshot(k), phi.snapshot(k), sigma.snapshot(k)}; }
};

/// out = Lap_h(in): second-order stencil with mirrored ghost cells.
void apply_laplacian(const GridSpec& grid, std::span<const double> in, std::span<double> out);
Field laplacian_neumann(const Field& f);

/// Volume-weighted L2(Omega) inner product.
double inner(const Field& a, const Field& b);
/// Space-time L2(Q) inner product. Node-layout fields use the right-endpoint rule over t_1..t_N.
double inner(const SpaceTimeField& a, const SpaceTimeField& b);
double norm(const Field& f);
double norm(const SpaceTimeField& f);
/// Spatial integral of one slice.
double integral(const GridSpec& grid, std::span<const double> values);
double mean(const Field& f);

enum class SliceDirection { Time, Space };

/// Time: spatial L2 norm of every slice. Space: temporal L2 norm per cell.
std::vector<double> slice_norms(const SpaceTimeField& u, SliceDirection direction);

/// CSV with one row per cell per snapshot: t,x[,y],<name>.
void write_csv(std::ostream& os, const SpaceTimeField& f, const std::string& name);
void write_csv(std::ostream& os, const Field& f, const std::string& name);

/// Shortest round-trip decimal representation, used by every CSV writer.
std::string format_real(double v);

} // namespace tsc
