#include "ergodic/app.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

int main(int argc, char** argv) {
    CLI::App cli{"Ergodic HJB solver and verification harness"};
    cli.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    for (const char* name : {"solve", "verify", "sweep", "oracle"}) {
        auto* sub = cli.add_subcommand(name);
        sub->add_option("--config", config_path, "run configuration file")->required();
        sub->add_option("--out", out_dir, "output directory (overrides [output] dir)");
        sub->add_option("--seed", seed, "random seed (overrides [solver] seed)");
    }

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        cli.exit(e);
        return ergodic::app::usage_error;
    }

    const auto* sub = cli.get_subcommands().front();
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
        std::cerr << "ergodic: cannot read config file '" << config_path << "'\n";
        return ergodic::app::usage_error;
    }
    std::ostringstream text;
    text << in.rdbuf();

    ergodic::app::CommandLine cl;
    cl.command = sub->get_name();
    cl.config_text = text.str();
    if (sub->count("--out")) cl.out_dir = out_dir;
    if (sub->count("--seed")) cl.seed = seed;
    return ergodic::app::run_command(cl);
}
