#pragma once

#include "tsc/fields.hpp"

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace tsc {

/// Physical and cost coefficients of the tumor system and of the cost functional.
struct ModelParams {
    double alpha = 1.0;   // relaxation of the mu-equation
    double beta = 1.0;    // relaxation of the phi-equation
    double chi = 0.0;     // chemotaxis
    double p_rate = 0.0;  // proliferation P
    double a_rate = 0.0;  // apoptosis A
    double b_rate = 0.0;  // nutrient supply B
    double e_rate = 0.0;  // consumption E
    double sigma_s = 0.0; // nutrient of the pre-existing vasculature
    double nu = 1.0;      // quadratic control weight
    double kappa = 1.0;   // sparsity weight
    double beta1 = 0.0;   // space-time tracking weight
    double beta2 = 0.0;   // final-time tracking weight

    /// Throws InvalidArgument naming the first offending coefficient.
    void validate() const;

    bool operator==(const ModelParams&) const = default;
};

struct Violation {
    std::string code;
    std::string message;
};

/// Sign conditions on the coefficients; empty when all hold.
std::vector<Violation> check_params(const ModelParams& params);

enum class PotentialKind { Regular, Logarithmic, CustomSplit };

struct PotentialValue {
    double f = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
    bool clamped = false;
};

/// Derivatives of the convex part F1 and the smooth remainder F2.
struct SplitValue {
    double f1d = 0.0;
    double f1dd = 0.0;
    double f2d = 0.0;
    double f2dd = 0.0;
    bool clamped = false;
};

/// Double-well potential F = F1 + F2 with F1 convex and F1(0) = 0.
class Potential {
public:
    /// Derivatives up to third order of F1 and F2, supplied by the caller.
    struct Split {
        std::function<double(double)> f1, f1d, f1dd, f1ddd;
        std::function<double(double)> f2, f2d, f2dd, f2ddd;
    };

    static constexpr double default_margin = 1e-12;

    /// F(r) = (1 - r^2)^2 / 4 on the real line.
    static Potential regular();
    /// F(r) = (1+r)ln(1+r) + (1-r)ln(1-r) - k r^2 on (-1, 1), k > 1.
    static Potential logarithmic(double k);
    static Potential custom(Split split, double r_minus, double r_plus);

    PotentialKind kind() const noexcept { return kind_; }
    std::string name() const;
    double log_k() const noexcept { return k_; }
    double r_minus() const noexcept { return r_minus_; }
    double r_plus() const noexcept { return r_plus_; }
    bool singular() const noexcept;
    double margin() const noexcept { return margin_; }
    Potential with_margin(double margin) const;

    /// True when r lies in (r- + margin, r+ - margin).
    bool admissible(double r) const noexcept;
    /// Distance of r to the nearer singular point (+inf for the regular potential).
    double boundary_distance(double r) const noexcept;

    /// F, F', F'', F'''. Arguments inside the margin band are clamped and flagged;
    /// arguments outside (r-, r+) raise SingularDomain.
    PotentialValue eval(double r) const;
    SplitValue eval_split(double r) const;
    double f1(double r) const;
    double f2(double r) const;
    double f1ddd(double r) const;

private:
    double clamp_arg(double r, bool& clamped) const;

    PotentialKind kind_ = PotentialKind::Regular;
    double k_ = 0.0;
    double r_minus_ = -std::numeric_limits<double>::infinity();
    double r_plus_ = std::numeric_limits<double>::infinity();
    double margin_ = default_margin;
    Split split_;
};

struct InterpolantValue {
    double h = 0.0;
    double hd = 0.0;
    double hdd = 0.0;
};

/// Interpolation function h with h(-1) = 0 and h(1) = 1.
class Interpolant {
public:
    using Eval = std::function<InterpolantValue(double)>;

    /// -20y^7 + 70y^6 - 84y^5 + 35y^4 with y = (r+1)/2, constant outside [-1, 1].
    static Interpolant smoothstep7();
    static Interpolant custom(std::string name, Eval eval);

    const std::string& name() const noexcept { return name_; }
    InterpolantValue eval(double r) const;
    double h(double r) const { return eval(r).h; }

private:
    std::string name_;
    Eval eval_;
};

/// Box constraints lo_i <= u_i <= hi_i. Each bound is a scalar or one value per control entry.
class BoxBounds {
public:
    BoxBounds() = default;
    static BoxBounds constant(double lo1, double hi1, double lo2, double hi2);
    static BoxBounds per_entry(std::vector<double> lo1, std::vector<double> hi1, std::vector<double> lo2,
                               std::vector<double> hi2);

    double lo(int control, std::size_t entry) const noexcept
    {
        const auto& v = lo_[control];
        return v.size() == 1 ? v[0] : v[entry];
    }
    double hi(int control, std::size_t entry) const noexcept
    {
        const auto& v = hi_[control];
        return v.size() == 1 ? v[0] : v[entry];
    }
    bool is_constant() const noexcept;
    /// Constant bounds with lo_i < 0 < hi_i for both controls.
    bool zero_interior() const noexcept;
    /// Throws BadBounds unless lo <= hi everywhere and the entry counts fit.
    void validate(std::size_t entries) const;

    bool operator==(const BoxBounds&) const = default;

private:
    std::vector<double> lo_[2] = {{-1.0}, {-1.0}};
    std::vector<double> hi_[2] = {{1.0}, {1.0}};
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool passed() const noexcept { return violations.empty(); }
    bool has(const std::string& code) const;
};

/// Checks coefficient signs, data finiteness, shared grids and strict separation of phi0.
ValidationReport validate_setup(const ModelParams& params, const Potential& pot, const StateTriple& init);

} // namespace tsc
