#include "tsc/config.hpp"

#include <functional>
#include <map>

namespace tsc {

namespace {

FieldRecipe constant(double v)
{
    FieldRecipe r;
    r.offset = v;
    return r;
}

FieldRecipe cosine(double offset, double amplitude)
{
    FieldRecipe r;
    r.kind = "cosine";
    r.offset = offset;
    r.amplitude = amplitude;
    return r;
}

void coupled(ModelParams& p)
{
    p.chi = 0.3;
    p.p_rate = 0.8;
    p.a_rate = 0.2;
    p.b_rate = 0.5;
    p.e_rate = 0.4;
    p.sigma_s = 1.0;
}

ExperimentConfig stationary_trivial()
{
    ExperimentConfig c;
    c.params.beta1 = 1.0;
    c.params.beta2 = 1.0;
    c.nx = 16;
    c.n_steps = 16;
    c.init_phi = constant(1.0);
    c.target_q = constant(1.0);
    c.target_omega = constant(1.0);
    return c;
}

ExperimentConfig log_1d()
{
    ExperimentConfig c;
    coupled(c.params);
    c.params.nu = 0.1;
    c.params.kappa = 0.01;
    c.params.beta1 = 1.0;
    c.params.beta2 = 1.0;
    c.potential = "logarithmic";
    c.log_k = 2.0;
    c.nx = 64;
    c.n_steps = 128;
    c.t_final = 1.0;
    c.init_phi = cosine(0.0, 0.5);
    c.init_sigma = constant(1.0);
    c.target_q = cosine(0.2, -0.4);
    c.target_omega = cosine(0.2, -0.4);
    c.u0.kind = "smooth";
    c.u0.amplitude = 0.5;
    c.optimizer.vi_tolerance = 1e-6;
    c.optimizer.max_iters = 1000;
    return c;
}

ExperimentConfig regular_2d()
{
    ExperimentConfig c;
    coupled(c.params);
    c.params.nu = 0.1;
    c.params.kappa = 0.01;
    c.params.beta1 = 1.0;
    c.params.beta2 = 1.0;
    c.dim = 2;
    c.nx = 16;
    c.ny = 16;
    c.n_steps = 32;
    c.t_final = 0.5;
    c.init_phi = cosine(0.0, 0.5);
    c.init_sigma = constant(1.0);
    c.target_q = constant(-0.2);
    c.target_omega = constant(-0.2);
    c.u0.kind = "smooth";
    return c;
}

ExperimentConfig time_sparsity_demo()
{
    ExperimentConfig c;
    coupled(c.params);
    c.params.nu = 0.1;
    c.params.kappa = 0.02;
    c.params.beta1 = 0.0;
    c.params.beta2 = 1.0;
    c.potential = "logarithmic";
    c.nx = 32;
    c.n_steps = 32;
    c.t_final = 1.0;
    c.init_phi = cosine(0.0, 0.5);
    c.init_sigma = constant(1.0);
    c.target_omega = cosine(-0.2, -0.5);
    c.mode = SparsityMode::TimeT;
    c.optimizer.vi_tolerance = 1e-9;
    c.optimizer.max_iters = 2000;
    c.u0.kind = "random";
    return c;
}

ExperimentConfig stress_separation()
{
    ExperimentConfig c;
    coupled(c.params);
    c.potential = "logarithmic";
    c.log_k = 2.0;
    c.nx = 32;
    c.n_steps = 64;
    c.t_final = 2.0;
    c.init_phi = cosine(0.5, 0.3);
    c.init_sigma = constant(1.0);
    c.lo1 = -200.0;
    c.hi1 = 200.0;
    c.lo2 = -200.0;
    c.hi2 = 200.0;
    c.u0.kind = "constant";
    c.u0.value1 = -200.0;
    return c;
}

ExperimentConfig tiny()
{
    ExperimentConfig c;
    coupled(c.params);
    c.params.nu = 0.5;
    c.params.kappa = 0.05;
    c.params.beta1 = 1.0;
    c.params.beta2 = 1.0;
    c.nx = 2;
    c.n_steps = 2;
    c.t_final = 1.0;
    c.init_phi = cosine(0.0, 0.5);
    c.init_sigma = constant(1.0);
    c.target_q = constant(0.8);
    c.target_omega = constant(0.8);
    c.mode = SparsityMode::FullQ;
    c.optimizer.vi_tolerance = 1e-10;
    c.optimizer.max_iters = 5000;
    return c;
}

const std::map<std::string, std::function<ExperimentConfig()>, std::less<>>& registry()
{
    static const std::map<std::string, std::function<ExperimentConfig()>, std::less<>> r = {
        {"stationary-trivial", stationary_trivial},
        {"1D-logarithmic-default", log_1d},
        {"2D-regular-default", regular_2d},
        {"time-sparsity-demo", time_sparsity_demo},
        {"stress-separation", stress_separation},
        {"tiny-2x2", tiny},
    };
    return r;
}

} // namespace

std::vector<std::string> preset_names()
{
    std::vector<std::string> out;
    for (const auto& [name, f] : registry()) out.push_back(name);
    return out;
}

ExperimentConfig preset(std::string_view name)
{
    const auto& r = registry();
    const auto it = r.find(name);
    if (it == r.end()) {
        throw UnknownValue("run.preset", 0, "no preset named '" + std::string(name) + "'");
    }
    auto c = it->second();
    c.preset = std::string(name);
    return c;
}

} // namespace tsc
