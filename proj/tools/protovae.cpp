#include <CLI11.hpp>

#include <iostream>

#include "protovae/cli/pipeline.hpp"
#include "protovae/error.hpp"

namespace cli = protovae::cli;

int main(int argc, char** argv) {
    CLI::App app{"Prototype-prior VAE experiments"};
    app.require_subcommand(1, 1);
    std::string config_path, out_dir;
    std::vector<std::string> overrides;
    const std::pair<const char*, const char*> commands[] = {
        {"train", "Train a model and write checkpoint.pvck and trace.csv"},
        {"eval", "Evaluate a checkpoint and write report.json and metrics.csv"},
        {"perturb", "Write the prepared (and perturbed) train/test datasets"},
        {"sweep", "Train and evaluate every cell of the factor grid, then aggregate"},
        {"report", "Render tables and SVG plots from report.json"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--set", overrides, "Override a config key, e.g. --set model.epochs=10");
        sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? cli::kExitOk : cli::kExitConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        if (!out_dir.empty()) overrides.push_back("output_dir=\"" + out_dir + "\"");
        const cli::ExperimentConfig cfg = cli::load_config(config_path, overrides);
        return cli::run_command(command, cfg, std::cerr);
    } catch (const protovae::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return cli::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitRuntime;
    }
}
