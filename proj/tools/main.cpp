#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace isomono::cli;

int main(int argc, char** argv) {
    CLI::App app{"isoflow: root calculus, phase spaces and isomonodromy flows on supernova graphs"};
    app.require_subcommand(1);
    CommandArgs args;
    std::uint64_t seed = 0;
    for (const auto& name : command_names()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--file,-f", args.file, "problem file");
        sub->add_option("--output,-o", args.output, "write machine-readable output here");
        if (name == "reflect") sub->add_option("--node", args.node, "node index in the full graph")->required();
        if (name == "orbit") sub->add_option("--depth", args.depth, "maximal word length")->check(CLI::NonNegativeNumber);
        if (name == "integrate" || name == "tau") sub->add_option("--step", args.step, "integration step")->check(CLI::PositiveNumber);
        if (name == "verify") {
            sub->add_option("suite", args.suite, "algebraic, flow, sl2, spectral, orbits or all")
                ->check(CLI::IsMember({"algebraic", "flow", "sl2", "spectral", "orbits", "all"}));
            sub->add_option("--seed", seed, "base seed")->each([&](const std::string&) { args.seed = seed; });
            sub->add_option("--trials", args.trials, "trials per check")->check(CLI::NonNegativeNumber);
        } else {
            sub->add_option("--seed", seed, "seed")->each([&](const std::string&) { args.seed = seed; });
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kInputError;
    }
    return run_command(app.get_subcommands().front()->get_name(), args, std::cout, std::cerr);
}
