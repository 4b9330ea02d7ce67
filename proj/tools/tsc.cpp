#include "tsc/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Sparse optimal control of a three-field tumor phase-field system"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir = "out";
    std::string override_cmd;
    for (const auto& name : tsc::kCommands) {
        auto* sub = app.add_subcommand(name, "run the " + name + " command");
        sub->add_option("--config", config_path, "YAML configuration file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output root; results go to <out>/run-<hash>/");
        sub->add_option("--command-override", override_cmd, "replace the command named in the config")
            ->check(CLI::IsMember(tsc::kCommands));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        auto config = tsc::load_config(config_path);
        config.command = override_cmd.empty() ? app.get_subcommands().front()->get_name() : override_cmd;
        const auto m = tsc::run(config, out_dir);
        std::cout << m.directory.string() << '\n';
        for (const auto& [name, ok] : m.checks) std::cout << (ok ? "PASS " : "FAIL ") << name << '\n';
        if (!m.failure.empty()) std::cerr << m.failure << '\n';
        return m.exit_code();
    } catch (const tsc::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const tsc::InvalidArgument& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
