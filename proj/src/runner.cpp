#include "tsc/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

namespace tsc {

namespace {

bool has_inline_values(const ExperimentConfig& c)
{
    for (const auto* r : {&c.init_mu, &c.init_phi, &c.init_sigma, &c.target_q, &c.target_omega}) {
        if (r->kind == "values") return true;
    }
    return false;
}

/// Smooth direction with both components of unit size.
ControlPair smooth_direction(const Problem& p)
{
    auto k = p.zero_control();
    const auto& g = p.grid;
    const double T = p.time.t_final;
    for (int n = 0; n < p.time.n_steps; ++n) {
        const double t = k.u1.slice_time(n) / T;
        for (int c = 0; c < g.cells(); ++c) {
            const double x = g.center(c)[0] / g.length[0];
            k.u1.at(n, c) = std::cos(std::numbers::pi * x) * (0.5 + t);
            k.u2.at(n, c) = std::sin(std::numbers::pi * x) * (1.0 - 0.5 * t);
        }
    }
    return k;
}

CheckReport not_applicable(std::string name, std::string note)
{
    CheckReport r;
    r.name = std::move(name);
    r.applicable = false;
    r.note = std::move(note);
    return r;
}

CheckReport brute_force_check(const ExperimentConfig& config)
{
    const auto problem = build_problem(config);
    const long dim = 2L * problem.grid.cells() * problem.time.n_steps;
    if (!config.verify.brute_force) {
        return not_applicable("brute_force", "disabled");
    }
    if (dim > 18) {
        return not_applicable("brute_force", "control dimension " + std::to_string(dim) + " exceeds 18");
    }
    const auto u0 = build_control(config.u0, problem, config.seed);
    const auto opt = proximal_gradient_solve(problem, u0, config.optimizer);
    const auto bf = brute_force_optimize(problem);
    CheckReport r;
    r.name = "brute_force";
    const double jstar = bf.cost;
    const double j = opt.cost.total();
    r.info("oracle_cost", jstar);
    r.info("optimizer_cost", j);
    r.info("oracle_evaluations", static_cast<double>(bf.evaluations));
    r.at_most("relative_cost_difference", std::abs(j - jstar) / (1.0 + std::abs(jstar)), 1e-4);
    return r;
}

CheckReport separation_check(const ExperimentConfig& config, const Problem& problem)
{
    if (!problem.model.potential.singular()) {
        return separation_monitor(Trajectory{}, problem.model.potential, config.verify.separation_threshold);
    }
    const auto u = build_control(config.u0, problem, config.seed);
    try {
        const auto traj = solve_state(problem.model, u, problem.init);
        return separation_monitor(traj, problem.model.potential, config.verify.separation_threshold);
    } catch (const SeparationLoss& e) {
        CheckReport r;
        r.name = "separation";
        r.note = "first offending step " + std::to_string(e.step());
        r.info("first_offending_step", e.step());
        r.at_least("min_margin", e.margin(), config.verify.separation_threshold);
        return r;
    }
}

template <class F>
CheckReport guarded(const std::string& name, F&& f)
{
    try {
        return f();
    } catch (const InvalidArgument& e) {
        return not_applicable(name, e.what());
    }
}

std::string slug(std::string s)
{
    for (auto& ch : s) {
        if (ch == ' ' || ch == '/') ch = '_';
    }
    return s;
}

} // namespace

Instance refined_instance(const ExperimentConfig& config, int level)
{
    if (level > 0 && has_inline_values(config)) {
        throw InvalidArgument("inline field values cannot be refined");
    }
    auto c = config;
    c.nx <<= level;
    if (c.dim == 2) c.ny <<= level;
    c.n_steps <<= level;
    Instance in{build_problem(c), {}, {}};
    ControlRecipe smooth;
    smooth.kind = "smooth";
    smooth.amplitude = config.u0.amplitude > 0.0 ? config.u0.amplitude : 0.5;
    in.u = build_control(smooth, in.problem, config.seed);
    in.k = smooth_direction(in.problem);
    return in;
}

std::vector<CheckReport> verification_suite(const ExperimentConfig& config)
{
    const auto& v = config.verify;
    const InstanceFactory factory = [&](int level) { return refined_instance(config, level); };
    const auto base = factory(0);
    std::vector<CheckReport> out;

    auto fd = fd_gradient_check(base.problem, base.u, v.fd_directions, default_eps_ladder(), config.seed,
                                v.gradient_tolerance);
    fd.name = "gradient_fd";
    out.push_back(std::move(fd));

    out.push_back(guarded("linearized_fd", [&] {
        auto r = linearized_refinement(factory, v.linearized_tolerance);
        r.name = "linearized_fd";
        return r;
    }));

    auto gap = duality_gap(base.problem, base.u, base.k, v.duality_tolerance);
    gap.name = "duality_gap";
    out.push_back(std::move(gap));

    out.push_back(guarded("duality_refinement", [&] {
        auto r = duality_gap_refinement(factory, v.refinement_levels, v.min_order);
        r.name = "duality_refinement";
        return r;
    }));

    auto sep = separation_check(config, base.problem);
    sep.name = "separation";
    out.push_back(std::move(sep));

    out.push_back(brute_force_check(config));
    return out;
}

RunManifest run(const ExperimentConfig& config, const std::filesystem::path& out)
{
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    validate_config(config);

    RunManifest m;
    m.hash = config_hash(config);
    m.command = config.command;
    m.directory = out / ("run-" + m.hash);
    std::filesystem::create_directories(m.directory);

    auto write = [&](const std::string& name, auto&& body) {
        std::ofstream os(m.directory / name, std::ios::binary);
        body(os);
        if (!os) {
            throw Error("cannot write " + (m.directory / name).string());
        }
        m.files.push_back(name);
    };
    auto timed = [&](const std::string& what, auto&& body) {
        const auto t0 = clock::now();
        body();
        m.timings.emplace_back(what, std::chrono::duration<double>(clock::now() - t0).count());
    };
    auto check = [&](const std::string& name, bool ok) {
        m.checks.emplace_back(name, ok);
        m.passed = m.passed && ok;
    };

    write("config.yaml", [&](std::ostream& os) { os << serialize_config(config); });

    try {
        const auto problem = build_problem(config);
        const auto& cmd = config.command;
        if (cmd == "simulate") {
            const auto u = build_control(config.u0, problem, config.seed);
            Trajectory traj;
            timed("solve", [&] { traj = solve_state(problem.model, u, problem.init); });
            write("mu.csv", [&](std::ostream& os) { write_csv(os, traj.mu, "mu"); });
            write("phi.csv", [&](std::ostream& os) { write_csv(os, traj.phi, "phi"); });
            write("sigma.csv", [&](std::ostream& os) { write_csv(os, traj.sigma, "sigma"); });
            write("balance.csv", [&](std::ostream& os) {
                os << "step,mass_residual,mass_relative,nutrient_residual,nutrient_relative,mean_sigma\n";
                for (const auto& b : state_balance_report(traj, problem.model.params, u, problem.model.interp)) {
                    os << b.step << ',' << format_real(b.mass_residual) << ',' << format_real(b.mass_relative) << ','
                       << format_real(b.nutrient_residual) << ',' << format_real(b.nutrient_relative) << ','
                       << format_real(b.mean_sigma) << '\n';
                }
            });
            write("cost.csv", [&](std::ostream& os) {
                const auto c = cost_of(problem, traj, u);
                os << "tracking_q,tracking_final,control,sparsity,total\n"
                   << format_real(c.tracking_q) << ',' << format_real(c.tracking_final) << ','
                   << format_real(c.control) << ',' << format_real(c.sparsity) << ',' << format_real(c.total())
                   << '\n';
            });
            if (problem.model.potential.singular()) {
                const auto sep =
                    separation_monitor(traj, problem.model.potential, config.verify.separation_threshold);
                write("separation.csv", [&](std::ostream& os) { write_table_csv(os, sep); });
                check("separation", sep.passed());
                if (!sep.passed()) m.failure = sep.note;
            }
        } else if (cmd == "optimize") {
            const auto u0 = build_control(config.u0, problem, config.seed);
            OptimizeResult r;
            timed("optimize", [&] { r = proximal_gradient_solve(problem, u0, config.optimizer); });
            write("history.csv", [&](std::ostream& os) { write_history_csv(os, r.history); });
            write("control_u1.csv", [&](std::ostream& os) { write_csv(os, r.control.u1, "u1"); });
            write("control_u2.csv", [&](std::ostream& os) { write_csv(os, r.control.u2, "u2"); });
            write("lambda_u1.csv", [&](std::ostream& os) { write_csv(os, r.lambda.u1, "lambda1"); });
            write("lambda_u2.csv", [&](std::ostream& os) { write_csv(os, r.lambda.u2, "lambda2"); });
            write("phi.csv", [&](std::ostream& os) { write_csv(os, r.state.phi, "phi"); });
            write("cost.csv", [&](std::ostream& os) {
                os << "tracking_q,tracking_final,control,sparsity,total,vi_residual,iterations,converged\n"
                   << format_real(r.cost.tracking_q) << ',' << format_real(r.cost.tracking_final) << ','
                   << format_real(r.cost.control) << ',' << format_real(r.cost.sparsity) << ','
                   << format_real(r.cost.total()) << ',' << format_real(r.vi_residual) << ',' << r.iterations << ','
                   << (r.converged ? 1 : 0) << '\n';
            });
            if (problem.mode != SparsityMode::None && problem.bounds.zero_interior()) {
                const auto cert = certificate(problem.mode, r.d, problem.bounds, problem.model.params.kappa);
                write("certificate.csv", [&](std::ostream& os) { write_certificate_csv(os, cert); });
            }
            check("converged", r.converged);
            if (!r.converged) m.failure = "optimizer stopped after " + std::to_string(r.iterations) + " iterations";
        } else if (cmd == "verify") {
            std::vector<CheckReport> reports;
            timed("verify", [&] { reports = verification_suite(config); });
            for (const auto& rep : reports) {
                write("check_" + slug(rep.name) + ".csv", [&](std::ostream& os) { write_check_csv(os, rep); });
                if (!rep.columns.empty()) {
                    write("table_" + slug(rep.name) + ".csv", [&](std::ostream& os) { write_table_csv(os, rep); });
                }
                check(rep.name, rep.passed());
            }
            write("summary.csv", [&](std::ostream& os) {
                os << "check,applicable,passed,note\n";
                for (const auto& rep : reports) {
                    os << rep.name << ',' << (rep.applicable ? 1 : 0) << ',' << (rep.passed() ? 1 : 0) << ",\""
                       << rep.note << "\"\n";
                }
            });
        } else if (cmd == "threshold" || cmd == "sweep-kappa") {
            if (problem.mode == SparsityMode::None && (cmd == "threshold" || config.kappas.empty())) {
                throw RangeError("optimizer.mode", 0, "command '" + cmd + "' needs a sparsity mode");
            }
            ThresholdReport th;
            const bool need_threshold = cmd == "threshold" || config.kappas.empty();
            if (need_threshold) {
                timed("threshold", [&] { th = zero_control_threshold(problem); });
                write("threshold.csv", [&](std::ostream& os) { write_threshold_csv(os, th, problem.mode); });
                write("threshold_norms.csv", [&](std::ostream& os) {
                    os << "slice,norm_d1,norm_d2\n";
                    for (std::size_t s = 0; s < th.norms1.size(); ++s) {
                        os << s << ',' << format_real(th.norms1[s]) << ',' << format_real(th.norms2[s]) << '\n';
                    }
                });
            }
            if (cmd == "sweep-kappa") {
                auto kappas = config.kappas;
                if (kappas.empty()) kappas = {0.0, 0.5 * th.kappa0, 2.0 * th.kappa0};
                const auto u0 = build_control(config.u0, problem, config.seed);
                std::vector<SweepRow> rows;
                timed("sweep", [&] { rows = kappa_sweep(problem, kappas, u0, config.optimizer); });
                write("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, rows); });
                bool all = true;
                for (const auto& r : rows) all = all && r.converged;
                check("converged", all);
                if (config.kappas.empty() && th.kappa0 > 0.0) {
                    check("support_beyond_threshold_zero", rows.back().support1 == 0.0 && rows.back().support2 == 0.0);
                }
                if (!m.passed) m.failure = "sweep checks failed";
            }
        }
    } catch (const SeparationLoss& e) {
        m.failure = e.what();
        write("failure.csv", [&](std::ostream& os) {
            os << "error,step,margin\nseparation_loss," << e.step() << ',' << format_real(e.margin()) << '\n';
        });
        check("solver", false);
    } catch (const NewtonDivergence& e) {
        m.failure = e.what();
        write("failure.csv", [&](std::ostream& os) { os << "error,step\nnewton_divergence," << e.step() << '\n'; });
        check("solver", false);
    } catch (const StepsizeCollapse& e) {
        m.failure = e.what();
        write("failure.csv", [&](std::ostream& os) { os << "error,step\nstepsize_collapse,\n"; });
        check("solver", false);
    }

    m.timings.emplace_back("total", std::chrono::duration<double>(clock::now() - start).count());

    std::ofstream os(m.directory / "manifest.txt", std::ios::binary);
    os << "hash=" << m.hash << '\n'
       << "command=" << m.command << '\n'
       << "version=" << kVersion << '\n'
       << "status=" << (m.passed ? "pass" : "fail") << '\n'
       << "exit_code=" << m.exit_code() << '\n';
    if (!m.failure.empty()) os << "failure=" << m.failure << '\n';
    for (const auto& [name, ok] : m.checks) os << "check." << name << '=' << (ok ? "pass" : "fail") << '\n';
    for (std::size_t i = 0; i < m.files.size(); ++i) os << "file." << i << '=' << m.files[i] << '\n';
    for (const auto& [key, value] : flatten_config(config)) os << "config." << key << '=' << value << '\n';

    std::ofstream ts(m.directory / "timings.txt", std::ios::binary);
    for (const auto& [name, s] : m.timings) ts << name << "_s=" << format_real(s) << '\n';
    return m;
}

} // namespace tsc
