#pragma once

#include "tsc/errors.hpp"
#include "tsc/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tsc {

/// Recipe for a spatial profile: constant, cosine (offset + amplitude cos(pi x/Lx)[cos(pi y/Ly)]),
/// bump (offset + amplitude exp(-|x - center|^2 / width^2)) or inline values.
struct FieldRecipe {
    std::string kind = "constant";
    double offset = 0.0;
    double amplitude = 0.0;
    double width = 0.25;
    std::vector<double> values;

    bool operator==(const FieldRecipe&) const = default;
};

Field build_field(const FieldRecipe& recipe, const GridSpec& grid);

/// Starting control: zero, random (uniform in amplitude times the box, seeded), constant or smooth
/// (amplitude-scaled smooth functions of (x, t)).
struct ControlRecipe {
    std::string kind = "zero";
    double amplitude = 0.5;
    double value1 = 0.0;
    double value2 = 0.0;

    bool operator==(const ControlRecipe&) const = default;
};

struct VerifySettings {
    int fd_directions = 5;
    int refinement_levels = 3;
    double gradient_tolerance = 1e-3;
    double linearized_tolerance = 1e-2;
    double duality_tolerance = 0.05;
    double min_order = 1.0;
    double separation_threshold = 1e-6;
    bool brute_force = true;

    bool operator==(const VerifySettings&) const = default;
};

struct ExperimentConfig {
    std::string command = "simulate";
    std::string preset;  // empty for a stand-alone config
    std::uint64_t seed = 1;

    ModelParams params;
    std::string potential = "regular";
    double log_k = 2.0;
    std::string interpolant = "smoothstep7";
    double clamp_margin = Potential::default_margin;
    SolverOptions solver;

    int dim = 1;
    int nx = 32;
    int ny = 1;
    double lx = 1.0;
    double ly = 1.0;
    double t_final = 1.0;
    int n_steps = 32;

    FieldRecipe init_mu, init_phi, init_sigma;
    FieldRecipe target_q, target_omega;

    double lo1 = -1.0, hi1 = 1.0, lo2 = -1.0, hi2 = 1.0;

    SparsityMode mode = SparsityMode::None;
    OptimizeOptions optimizer;
    ControlRecipe u0;
    std::vector<double> kappas;  // empty: {0, threshold/2, 2 threshold}

    VerifySettings verify;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Located configuration problem; line is 1-based, 0 when unknown.
class ConfigError : public Error {
public:
    ConfigError(const std::string& kind, std::string key, int line, const std::string& message);
    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

class ParseError : public ConfigError {
public:
    ParseError(std::string key, int line, const std::string& message)
        : ConfigError("parse error", std::move(key), line, message)
    {
    }
};

class UnknownKey : public ConfigError {
public:
    UnknownKey(std::string key, int line, const std::string& message)
        : ConfigError("unknown key", std::move(key), line, message)
    {
    }
};

class MissingKey : public ConfigError {
public:
    MissingKey(std::string key, int line, const std::string& message)
        : ConfigError("missing key", std::move(key), line, message)
    {
    }
};

class RangeError : public ConfigError {
public:
    RangeError(std::string key, int line, const std::string& message)
        : ConfigError("range error", std::move(key), line, message)
    {
    }
};

class UnknownValue : public ConfigError {
public:
    UnknownValue(std::string key, int line, const std::string& message)
        : ConfigError("unknown value", std::move(key), line, message)
    {
    }
};

extern const std::vector<std::string> kCommands;

/// YAML text to a validated config. A `run.preset` entry starts from that preset and the
/// remaining keys override it.
ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Fully defaulted YAML; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);
/// Flat section.key = value pairs in serialization order.
std::vector<std::pair<std::string, std::string>> flatten_config(const ExperimentConfig& config);
/// FNV-1a of the serialized config, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

/// Throws RangeError (key named, line 0) for out-of-range values.
void validate_config(const ExperimentConfig& config);

Model build_model(const ExperimentConfig& config);
Problem build_problem(const ExperimentConfig& config);
ControlPair build_control(const ControlRecipe& recipe, const Problem& problem, std::uint64_t seed);

std::vector<std::string> preset_names();
/// Throws UnknownValue for unknown names.
ExperimentConfig preset(std::string_view name);

} // namespace tsc
