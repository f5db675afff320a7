// Command-line driver: thinlayer <command> --config run.json [--out DIR] [--jobs N] [--seed S] [--log-level L]

#include "thinlayer/cli.hpp"
#include "thinlayer/errors.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Homogenized Stokes flow in thin perforated layers"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config, out, level = "info";
    int jobs = 1;
    std::uint64_t seed = 1;
    app.add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "output directory, overrides outputs.directory");
    app.add_option("--jobs", jobs, "concurrent sub-jobs")->check(CLI::PositiveNumber);
    app.add_option("--seed", seed, "seed for random test fields");
    app.add_option("--log-level", level, "trace, debug, info, warn, error, off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}));
    for (const char* name : {"cell", "darcy", "micro", "converge", "analyze", "pipeline"})
        app.add_subcommand(name);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    spdlog::set_level(spdlog::level::from_str(level));

    try {
        const auto command = thinlayer::parse_command(app.get_subcommands().front()->get_name());
        const auto cfg = thinlayer::RunConfig::load(config);
        thinlayer::RunOptions opt;
        opt.out_dir = out;
        opt.jobs = jobs;
        opt.seed = seed;
        thinlayer::run(command, cfg, opt);
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return thinlayer::exit_code_for(e);
    }
    return 0;
}
