#pragma once

#include <functional>
#include <vector>

#include "CLI11.hpp"
#include "run_context.hpp"

namespace ctsf::cli {

struct Command {
  CLI::App* app = nullptr;
  std::function<void(RunContext&)> run;
};

/// Registers every subcommand on `app`.
std::vector<Command> add_commands(CLI::App& app);

}  // namespace ctsf::cli
