#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "problem.hpp"

namespace isomono::cli {

enum ExitCode : int { kPass = 0, kFailure = 1, kInputError = 2, kNumericalAbort = 3 };

struct CommandArgs {
    std::string file;
    std::optional<int> node;
    int depth = 1;
    std::optional<double> step;
    std::optional<std::uint64_t> seed;
    std::optional<int> trials;
    std::string output;
    std::string suite = "all";
};

const std::vector<std::string>& command_names();

// runs one subcommand; errors are reported on err and mapped to an exit code
int run_command(const std::string& name, const CommandArgs& args, std::ostream& out, std::ostream& err);

} // namespace isomono::cli
