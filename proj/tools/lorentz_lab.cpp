#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lorentz/cli.hpp"
#include "lorentz/errors.hpp"

namespace {

std::string usage() {
    std::string s = "usage: lorentz-lab <subcommand> --config <path> --out <dir> [--seed N] [--threads N]\nsubcommands:";
    for (const std::string& n : lorentz::subcommand_names()) s += " " + n;
    return s + "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Forced periodic Lorentz gas experiments"};
    std::string sub, config, out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    app.add_option("subcommand", sub, "experiment to run")->required();
    app.add_option("--config", config, "config file")->required();
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--threads", threads, "worker threads (overrides the config)");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help() << usage();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n' << usage();
        return 2;
    }

    const auto& names = lorentz::subcommand_names();
    if (std::find(names.begin(), names.end(), sub) == names.end()) {
        std::cerr << "unknown subcommand '" << sub << "'\n" << usage();
        return 2;
    }
    try {
        lorentz::ExperimentConfig cfg = lorentz::parse_config(config);
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        lorentz::run_subcommand(sub, cfg, out).write(std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return lorentz::exit_code_for(e);
    }
    return 0;
}
