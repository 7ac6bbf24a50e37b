// tfus: command-line front end for the planning and simulation pipeline.
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tfus/commands.hpp"
#include "tfus/error.hpp"
#include "tfus/solver.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Transcranial focused ultrasound planning and simulation"};
    app.require_subcommand(1);

    std::string config_path;
    int threads = 1;
    bool stable = false;
    for (const char* name : {"preprocess", "plan", "simulate", "compare", "phantom"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("-c,--config", config_path, "JSON run config")->required();
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_flag("--stable-output", stable, "omit wall-clock fields from reports");
    }
    app.get_subcommand("preprocess")->description("clip, resample and mask the CT(s)");
    app.get_subcommand("plan")->description("pose search and per-element skull metrics");
    app.get_subcommand("simulate")->description("acoustic simulation for the configured correction mode(s)");
    app.get_subcommand("compare")->description("compare two simulate runs and update the study table");
    app.get_subcommand("phantom")->description("write a synthetic skull phantom (and perturbed copy)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        tfus::set_thread_count(threads);
        const tfus::RunConfig cfg = tfus::load_config(config_path);
        tfus::run_command(command, cfg, {stable});
    } catch (const std::exception& e) {
        std::cerr << "tfus " << command << ": " << e.what() << '\n';
        return tfus::exit_code_for(e);
    }
    return 0;
}
