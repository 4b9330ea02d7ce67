#pragma once

#include "tsc/config.hpp"
#include "tsc/verify.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace tsc {

inline constexpr const char* kVersion = "0.1.0";

struct RunManifest {
    std::string hash;
    std::string command;
    std::filesystem::path directory;
    std::vector<std::string> files;  // relative to directory, in write order
    std::vector<std::pair<std::string, double>> timings;
    std::vector<std::pair<std::string, bool>> checks;
    std::string failure;  // empty on success
    bool passed = true;

    int exit_code() const noexcept { return passed ? 0 : 1; }
};

/// Control and direction at refinement level r of a config (cells and steps doubled per level).
Instance refined_instance(const ExperimentConfig& config, int level);

/// The verify suite on a config; each report is also written by run().
std::vector<CheckReport> verification_suite(const ExperimentConfig& config);

/// Executes config.command into out/run-<hash>/, then writes manifest.txt and timings.txt.
/// Everything except timings.txt is a deterministic function of the config.
/// Solver failures are recorded in the manifest and produce passed = false.
RunManifest run(const ExperimentConfig& config, const std::filesystem::path& out);

} // namespace tsc
