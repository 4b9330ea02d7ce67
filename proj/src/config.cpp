#include "tsc/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace tsc {

ConfigError::ConfigError(const std::string& kind, std::string key, int line, const std::string& message)
    : Error(kind + (key.empty() ? "" : " at '" + key + "'") + (line > 0 ? " (line " + std::to_string(line) + ")" : "") +
            ": " + message),
      key_(std::move(key)), line_(line)
{
}

const std::vector<std::string> kCommands = {"simulate", "optimize", "verify", "sweep-kappa", "threshold"};

namespace {

const std::vector<std::string> kFieldKinds = {"constant", "cosine", "bump", "values"};
const std::vector<std::string> kControlKinds = {"zero", "random", "constant", "smooth"};

template <class Recipe, class V>
void visit_recipe(const char* section, Recipe& r, V& v)
{
    v(section, "kind", r.kind);
    v(section, "offset", r.offset);
    v(section, "amplitude", r.amplitude);
    v(section, "width", r.width);
    v(section, "values", r.values);
}

/// Every configurable value with its section path and key, in serialization order.
template <class C, class V>
void visit_fields(C& c, V&& v)
{
    v("run", "command", c.command);
    v("run", "preset", c.preset);
    v("run", "seed", c.seed);

    auto& p = c.params;
    v("model", "alpha", p.alpha);
    v("model", "beta", p.beta);
    v("model", "chi", p.chi);
    v("model", "p_rate", p.p_rate);
    v("model", "a_rate", p.a_rate);
    v("model", "b_rate", p.b_rate);
    v("model", "e_rate", p.e_rate);
    v("model", "sigma_s", p.sigma_s);
    v("model", "nu", p.nu);
    v("model", "kappa", p.kappa);
    v("model", "beta1", p.beta1);
    v("model", "beta2", p.beta2);

    v("potential", "kind", c.potential);
    v("potential", "log_k", c.log_k);
    v("potential", "h", c.interpolant);
    v("potential", "margin", c.clamp_margin);

    v("solver", "cg_tolerance", c.solver.cg_tolerance);
    v("solver", "newton_tolerance", c.solver.newton_tolerance);
    v("solver", "newton_max_iterations", c.solver.newton_max_iterations);
    v("solver", "max_step_halvings", c.solver.max_step_halvings);

    v("grid", "dim", c.dim);
    v("grid", "nx", c.nx);
    v("grid", "ny", c.ny);
    v("grid", "lx", c.lx);
    v("grid", "ly", c.ly);
    v("grid", "t_final", c.t_final);
    v("grid", "n_steps", c.n_steps);

    visit_recipe("initial.mu", c.init_mu, v);
    visit_recipe("initial.phi", c.init_phi, v);
    visit_recipe("initial.sigma", c.init_sigma, v);
    visit_recipe("targets.phi_q", c.target_q, v);
    visit_recipe("targets.phi_omega", c.target_omega, v);

    v("bounds", "lo1", c.lo1);
    v("bounds", "hi1", c.hi1);
    v("bounds", "lo2", c.lo2);
    v("bounds", "hi2", c.hi2);

    auto& o = c.optimizer;
    v("optimizer", "mode", c.mode);
    v("optimizer", "max_iters", o.max_iters);
    v("optimizer", "initial_step", o.initial_step);
    v("optimizer", "backtrack", o.backtrack);
    v("optimizer", "sufficient_decrease", o.sufficient_decrease);
    v("optimizer", "vi_tolerance", o.vi_tolerance);
    v("optimizer", "cost_tolerance", o.cost_tolerance);
    v("optimizer", "min_step", o.min_step);
    v("optimizer", "kappas", c.kappas);
    v("optimizer.u0", "kind", c.u0.kind);
    v("optimizer.u0", "amplitude", c.u0.amplitude);
    v("optimizer.u0", "value1", c.u0.value1);
    v("optimizer.u0", "value2", c.u0.value2);

    v("verify", "fd_directions", c.verify.fd_directions);
    v("verify", "refinement_levels", c.verify.refinement_levels);
    v("verify", "gradient_tolerance", c.verify.gradient_tolerance);
    v("verify", "linearized_tolerance", c.verify.linearized_tolerance);
    v("verify", "duality_tolerance", c.verify.duality_tolerance);
    v("verify", "min_order", c.verify.min_order);
    v("verify", "separation_threshold", c.verify.separation_threshold);
    v("verify", "brute_force", c.verify.brute_force);
}

std::string path_of(const char* section, const char* key) { return std::string(section) + "." + key; }

std::vector<std::string> split_path(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, '.')) out.push_back(part);
    return out;
}

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

/// Looks a dotted path up without creating nodes.
YAML::Node find(const YAML::Node& root, const std::string& path)
{
    YAML::Node cur = root;
    for (const auto& part : split_path(path)) {
        if (!cur || !cur.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
        YAML::Node next = cur[part];
        if (!next) return YAML::Node(YAML::NodeType::Undefined);
        cur.reset(next);
    }
    return cur;
}

std::string scalar(const YAML::Node& n, const std::string& key)
{
    if (!n.IsScalar()) {
        throw ParseError(key, line_of(n), "expected a scalar value");
    }
    return n.Scalar();
}

double parse_real(const std::string& text, const std::string& key, int line)
{
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    if (!text.empty() && *b == '+') ++b;
    const auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec == std::errc::result_out_of_range) {
        throw RangeError(key, line, "'" + text + "' is out of range");
    }
    if (ec != std::errc() || ptr != e) {
        if (text == ".inf" || text == "-.inf" || text == ".nan" || text == "inf" || text == "nan") {
            throw RangeError(key, line, "numbers must be finite");
        }
        throw ParseError(key, line, "'" + text + "' is not a number");
    }
    if (!std::isfinite(v)) {
        throw RangeError(key, line, "numbers must be finite");
    }
    return v;
}

template <class Int>
Int parse_integer(const std::string& text, const std::string& key, int line)
{
    Int v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec == std::errc::result_out_of_range) {
        throw RangeError(key, line, "'" + text + "' is out of range");
    }
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw ParseError(key, line, "'" + text + "' is not an integer");
    }
    return v;
}

void read(const YAML::Node& n, const std::string& key, double& out) { out = parse_real(scalar(n, key), key, line_of(n)); }
void read(const YAML::Node& n, const std::string& key, int& out)
{
    out = parse_integer<int>(scalar(n, key), key, line_of(n));
}
void read(const YAML::Node& n, const std::string& key, std::uint64_t& out)
{
    out = parse_integer<std::uint64_t>(scalar(n, key), key, line_of(n));
}
void read(const YAML::Node& n, const std::string& key, std::string& out) { out = scalar(n, key); }
void read(const YAML::Node& n, const std::string& key, bool& out)
{
    const auto s = scalar(n, key);
    if (s == "true") {
        out = true;
    } else if (s == "false") {
        out = false;
    } else {
        throw ParseError(key, line_of(n), "expected true or false");
    }
}
void read(const YAML::Node& n, const std::string& key, std::vector<double>& out)
{
    if (!n.IsSequence()) {
        throw ParseError(key, line_of(n), "expected a list of numbers");
    }
    out.clear();
    for (const auto& item : n) {
        out.push_back(parse_real(scalar(item, key), key, line_of(item)));
    }
}
void read(const YAML::Node& n, const std::string& key, SparsityMode& out)
{
    const auto s = scalar(n, key);
    try {
        out = parse_sparsity_mode(s);
    } catch (const InvalidArgument&) {
        throw UnknownValue(key, line_of(n), "'" + s + "' is not a sparsity mode (none, full, time, space)");
    }
}

std::string text(double v) { return format_real(v); }
std::string text(int v) { return std::to_string(v); }
std::string text(std::uint64_t v) { return std::to_string(v); }
std::string text(bool v) { return v ? "true" : "false"; }
std::string text(const std::string& v) { return v; }
std::string text(SparsityMode m) { return std::string(to_string(m)); }
std::string text(const std::vector<double>& v)
{
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? ", " : "") + format_real(v[i]);
    }
    return s + "]";
}

void emit(YAML::Emitter& out, const std::string& v)
{
    out << YAML::DoubleQuoted << v;
}
void emit(YAML::Emitter& out, const std::vector<double>& v)
{
    out << YAML::Flow << YAML::BeginSeq;
    for (double x : v) out << format_real(x);
    out << YAML::EndSeq;
}
template <class T>
void emit(YAML::Emitter& out, const T& v)
{
    out << text(v);
}

int key_line(const YAML::Node& root, const std::string& key)
{
    const auto n = find(root, key);
    return n ? line_of(n) : 0;
}

void check_unknown(const YAML::Node& node, const std::string& prefix, const std::set<std::string>& leaves,
                   const std::set<std::string>& sections)
{
    for (const auto& kv : node) {
        const std::string k = kv.first.Scalar();
        const std::string path = prefix.empty() ? k : prefix + "." + k;
        if (leaves.count(path)) {
            continue;
        }
        if (sections.count(path)) {
            if (!kv.second.IsMap()) {
                throw ParseError(path, line_of(kv.second), "expected a section");
            }
            check_unknown(kv.second, path, leaves, sections);
            continue;
        }
        throw UnknownKey(path, line_of(kv.first), "not a recognized setting");
    }
}

void require_one_of(const std::string& value, const std::vector<std::string>& allowed, const std::string& key)
{
    if (std::find(allowed.begin(), allowed.end(), value) == allowed.end()) {
        std::string list;
        for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
        throw UnknownValue(key, 0, "'" + value + "' is not one of " + list);
    }
}

void range(bool ok, const std::string& key, const std::string& message)
{
    if (!ok) {
        throw RangeError(key, 0, message);
    }
}

void validate_recipe(const FieldRecipe& r, const std::string& section, int cells)
{
    require_one_of(r.kind, kFieldKinds, section + ".kind");
    range(r.width > 0.0, section + ".width", "must be positive");
    if (r.kind == "values") {
        if (r.values.empty()) {
            throw MissingKey(section + ".values", 0, "kind 'values' needs a values list");
        }
        range(static_cast<int>(r.values.size()) == cells, section + ".values",
              "expected " + std::to_string(cells) + " entries, got " + std::to_string(r.values.size()));
    }
}

} // namespace

void validate_config(const ExperimentConfig& c)
{
    require_one_of(c.command, kCommands, "run.command");
    if (!c.preset.empty()) {
        const auto names = preset_names();
        require_one_of(c.preset, names, "run.preset");
    }
    for (const auto& v : check_params(c.params)) {
        const auto name = v.code.substr(0, v.code.find(' '));
        throw RangeError("model." + name, 0, "must be " + v.code.substr(v.code.find(' ') + 1));
    }
    require_one_of(c.potential, {"regular", "logarithmic"}, "potential.kind");
    require_one_of(c.interpolant, {"smoothstep7"}, "potential.h");
    if (c.potential == "logarithmic") {
        range(c.log_k > 1.0, "potential.log_k", "must exceed 1");
    }
    range(c.clamp_margin > 0.0 && c.clamp_margin < 0.1, "potential.margin", "must lie in (0, 0.1)");
    range(c.solver.cg_tolerance > 0.0 && c.solver.cg_tolerance < 1.0, "solver.cg_tolerance", "must lie in (0, 1)");
    range(c.solver.newton_tolerance > 0.0, "solver.newton_tolerance", "must be positive");
    range(c.solver.newton_max_iterations >= 1, "solver.newton_max_iterations", "must be at least 1");
    range(c.solver.max_step_halvings >= 0, "solver.max_step_halvings", "must be nonnegative");

    range(c.dim == 1 || c.dim == 2, "grid.dim", "must be 1 or 2");
    range(c.nx >= 1, "grid.nx", "must be at least 1");
    range(c.ny >= 1, "grid.ny", "must be at least 1");
    range(c.dim == 2 || c.ny == 1, "grid.ny", "must be 1 for one-dimensional grids");
    range(c.lx > 0.0, "grid.lx", "must be positive");
    range(c.ly > 0.0, "grid.ly", "must be positive");
    range(c.t_final > 0.0, "grid.t_final", "must be positive");
    range(c.n_steps >= 1, "grid.n_steps", "must be at least 1");

    const int cells = c.nx * (c.dim == 2 ? c.ny : 1);
    validate_recipe(c.init_mu, "initial.mu", cells);
    validate_recipe(c.init_phi, "initial.phi", cells);
    validate_recipe(c.init_sigma, "initial.sigma", cells);
    validate_recipe(c.target_q, "targets.phi_q", cells);
    validate_recipe(c.target_omega, "targets.phi_omega", cells);

    range(c.lo1 <= c.hi1, "bounds.lo1", "must not exceed hi1");
    range(c.lo2 <= c.hi2, "bounds.lo2", "must not exceed hi2");

    const auto& o = c.optimizer;
    range(o.max_iters >= 0, "optimizer.max_iters", "must be nonnegative");
    range(o.initial_step >= 0.0, "optimizer.initial_step", "must be nonnegative");
    range(o.backtrack > 0.0 && o.backtrack < 1.0, "optimizer.backtrack", "must lie in (0, 1)");
    range(o.sufficient_decrease > 0.0, "optimizer.sufficient_decrease", "must be positive");
    range(o.vi_tolerance > 0.0, "optimizer.vi_tolerance", "must be positive");
    range(o.cost_tolerance >= 0.0, "optimizer.cost_tolerance", "must be nonnegative");
    range(o.min_step > 0.0, "optimizer.min_step", "must be positive");
    for (std::size_t i = 0; i < c.kappas.size(); ++i) {
        range(c.kappas[i] >= 0.0, "optimizer.kappas", "entries must be nonnegative");
        range(i == 0 || c.kappas[i - 1] <= c.kappas[i], "optimizer.kappas", "must be ascending");
    }
    require_one_of(c.u0.kind, kControlKinds, "optimizer.u0.kind");
    range(c.u0.amplitude >= 0.0 && c.u0.amplitude <= 1.0, "optimizer.u0.amplitude", "must lie in [0, 1]");

    range(c.verify.fd_directions >= 1, "verify.fd_directions", "must be at least 1");
    range(c.verify.refinement_levels >= 3, "verify.refinement_levels", "must be at least 3");
    range(c.verify.gradient_tolerance > 0.0, "verify.gradient_tolerance", "must be positive");
    range(c.verify.linearized_tolerance > 0.0, "verify.linearized_tolerance", "must be positive");
    range(c.verify.duality_tolerance > 0.0, "verify.duality_tolerance", "must be positive");
    range(c.verify.separation_threshold > 0.0, "verify.separation_threshold", "must be positive");
}

ExperimentConfig parse_config(std::string_view source)
{
    YAML::Node root;
    try {
        root = YAML::Load(std::string(source));
    } catch (const YAML::ParserException& e) {
        throw ParseError("", e.mark.line + 1, e.msg);
    }
    if (root.IsNull()) {
        root = YAML::Node(YAML::NodeType::Map);
    }
    if (!root.IsMap()) {
        throw ParseError("", line_of(root), "the configuration must be a mapping of sections");
    }

    std::set<std::string> leaves, sections;
    const ExperimentConfig defaults;
    visit_fields(defaults, [&](const char* section, const char* key, const auto&) {
        leaves.insert(path_of(section, key));
        std::string s;
        for (const auto& part : split_path(section)) {
            s += (s.empty() ? "" : ".") + part;
            sections.insert(s);
        }
    });
    check_unknown(root, "", leaves, sections);

    ExperimentConfig c;
    if (const auto p = find(root, "run.preset"); p) {
        const auto name = scalar(p, "run.preset");
        if (!name.empty()) {
            try {
                c = preset(name);
            } catch (const UnknownValue& e) {
                throw UnknownValue("run.preset", line_of(p), "no preset named '" + name + "'");
            }
        }
    } else {
        for (const char* key : {"grid.nx", "grid.n_steps", "grid.t_final"}) {
            if (!find(root, key)) {
                throw MissingKey(key, 0, "required unless run.preset is given");
            }
        }
    }

    visit_fields(c, [&](const char* section, const char* key, auto& ref) {
        const auto path = path_of(section, key);
        if (const auto n = find(root, path); n) {
            read(n, path, ref);
        }
    });

    try {
        validate_config(c);
    } catch (const RangeError& e) {
        throw RangeError(e.key(), key_line(root, e.key()), std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
    } catch (const UnknownValue& e) {
        throw UnknownValue(e.key(), key_line(root, e.key()), std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
    } catch (const MissingKey& e) {
        throw MissingKey(e.key(), key_line(root, e.key().substr(0, e.key().rfind('.'))),
                         std::string(e.what()).substr(std::string(e.what()).find(": ") + 2));
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ParseError("", 0, "cannot read " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c)
{
    YAML::Emitter out;
    out << YAML::BeginMap;
    std::vector<std::string> open;
    visit_fields(c, [&](const char* section, const char* key, const auto& ref) {
        const auto parts = split_path(section);
        std::size_t common = 0;
        while (common < open.size() && common < parts.size() && open[common] == parts[common]) ++common;
        while (open.size() > common) {
            out << YAML::EndMap;
            open.pop_back();
        }
        for (std::size_t i = common; i < parts.size(); ++i) {
            out << YAML::Key << parts[i] << YAML::Value << YAML::BeginMap;
            open.push_back(parts[i]);
        }
        out << YAML::Key << key << YAML::Value;
        emit(out, ref);
    });
    while (!open.empty()) {
        out << YAML::EndMap;
        open.pop_back();
    }
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::vector<std::pair<std::string, std::string>> flatten_config(const ExperimentConfig& c)
{
    std::vector<std::pair<std::string, std::string>> out;
    visit_fields(c, [&](const char* section, const char* key, const auto& ref) {
        out.emplace_back(path_of(section, key), text(ref));
    });
    return out;
}

std::string config_hash(const ExperimentConfig& c)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_config(c)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Field build_field(const FieldRecipe& r, const GridSpec& grid)
{
    Field f(grid, r.offset);
    if (r.kind == "constant") {
        return f;
    }
    if (r.kind == "values") {
        return Field(grid, r.values);
    }
    for (int c = 0; c < grid.cells(); ++c) {
        const auto x = grid.center(c);
        if (r.kind == "cosine") {
            double v = std::cos(std::numbers::pi * x[0] / grid.length[0]);
            if (grid.dim == 2) v *= std::cos(std::numbers::pi * x[1] / grid.length[1]);
            f[c] += r.amplitude * v;
        } else if (r.kind == "bump") {
            double d2 = 0.0;
            for (int a = 0; a < grid.dim; ++a) {
                const double dx = x[a] - 0.5 * grid.length[a];
                d2 += dx * dx;
            }
            f[c] += r.amplitude * std::exp(-d2 / (r.width * r.width));
        } else {
            throw InvalidArgument("unknown field recipe '" + r.kind + "'");
        }
    }
    return f;
}

Model build_model(const ExperimentConfig& c)
{
    Model m;
    m.params = c.params;
    m.potential = (c.potential == "logarithmic" ? Potential::logarithmic(c.log_k) : Potential::regular())
                      .with_margin(c.clamp_margin);
    m.interp = Interpolant::smoothstep7();
    m.solver = c.solver;
    return m;
}

Problem build_problem(const ExperimentConfig& c)
{
    validate_config(c);
    const auto grid = c.dim == 2 ? GridSpec::rect(c.nx, c.ny, c.lx, c.ly) : GridSpec::line(c.nx, c.lx);
    const TimeGrid time{c.t_final, c.n_steps};
    Problem p{build_model(c),
              grid,
              time,
              StateTriple{build_field(c.init_mu, grid), build_field(c.init_phi, grid), build_field(c.init_sigma, grid)},
              Targets{SpaceTimeField::nodes(grid, time), build_field(c.target_omega, grid)},
              BoxBounds::constant(c.lo1, c.hi1, c.lo2, c.hi2),
              c.mode};
    const auto q = build_field(c.target_q, grid);
    for (int k = 0; k <= time.n_steps; ++k) {
        p.targets.phi_q.set_snapshot(k, q);
    }
    return p;
}

ControlPair build_control(const ControlRecipe& r, const Problem& problem, std::uint64_t seed)
{
    auto u = problem.zero_control();
    const auto& b = problem.bounds;
    if (r.kind == "zero") {
        return u;
    }
    if (r.kind == "constant") {
        for (auto& v : u.u1.values()) v = r.value1;
        for (auto& v : u.u2.values()) v = r.value2;
        return u;
    }
    if (r.kind == "random") {
        std::mt19937_64 rng(seed);
        for (int c = 0; c < 2; ++c) {
            auto vals = u[c].values();
            for (std::size_t e = 0; e < vals.size(); ++e) {
                std::uniform_real_distribution<double> d(r.amplitude * b.lo(c, e), r.amplitude * b.hi(c, e));
                vals[e] = d(rng);
            }
        }
        return u;
    }
    if (r.kind == "smooth") {
        const auto& g = problem.grid;
        const double T = problem.time.t_final;
        const double m1 = std::min(-b.lo(0, 0), b.hi(0, 0));
        const double m2 = std::min(-b.lo(1, 0), b.hi(1, 0));
        for (int k = 0; k < problem.time.n_steps; ++k) {
            const double t = u.u1.slice_time(k);
            for (int c = 0; c < g.cells(); ++c) {
                const double x = g.center(c)[0] / g.length[0];
                u.u1.at(k, c) = r.amplitude * m1 * std::sin(2 * std::numbers::pi * x + t);
                u.u2.at(k, c) = r.amplitude * m2 * std::cos(std::numbers::pi * x) * (1.0 - 0.5 * t / T);
            }
        }
        return u;
    }
    throw InvalidArgument("unknown control recipe '" + r.kind + "'");
}

} // namespace tsc
