#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "ctsf/errors.hpp"
#include "run_context.hpp"

namespace cli = ctsf::cli;

namespace {

std::string one_line(std::string text) {
  for (char& c : text)
    if (c == '\n' || c == '\r') c = ' ';
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

int fail(int code, const std::string& message) {
  std::cerr << "ctsf: error=" << cli::exit_kind(code) << " code=" << code << " reason=" << one_line(message) << '\n';
  return code;
}

int run(std::vector<std::string> args);

// Re-runs the command recorded in a manifest after checking its input digests.
int replay(const std::string& manifest, const std::string& out) {
  const cli::KeyValues entries = cli::read_key_values(manifest);
  std::string command;
  std::vector<std::pair<std::string, std::string>> paths, digests;
  for (const auto& [k, v] : entries) {
    if (k == "command") command = v;
    if (k.starts_with("input.") && k.ends_with(".path")) paths.emplace_back(k.substr(0, k.size() - 5), v);
    if (k.starts_with("input.") && k.ends_with(".sha256")) digests.emplace_back(k.substr(0, k.size() - 7), v);
  }
  if (command.empty() || command == "replay") throw cli::ExitError(cli::kExitUsage, manifest + " names no command");
  for (const auto& [name, path] : paths)
    for (const auto& [dname, digest] : digests)
      if (dname == name && cli::sha256_file(path) != digest)
        throw cli::ExitError(cli::kExitData, path + " changed since the manifest was written");
  std::vector<std::string> args{command, "--config", manifest};
  if (!out.empty()) args.insert(args.end(), {"--out", out});
  return run(args);
}

int run(std::vector<std::string> args) {
  CLI::App app{"Correlated time series forecasting with convolutional recurrent networks", "ctsf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kVersion);
  app.option_defaults()->always_capture_default();
  app.footer(
      "Exit codes: 0 success, 1 usage, 2 data, 3 numeric divergence or failed gradient check.\n"
      "Failures print one line: ctsf: error=<kind> code=<n> reason=<text>.\n"
      "Every run writes manifest.cfg (key=value) into its output directory; the output root\n"
      "defaults to $CTSF_OUTPUT_ROOT or ./ctsf-runs. Options may come from --config <key=value file>;\n"
      "command-line flags take precedence.");

  std::vector<cli::Command> commands = cli::add_commands(app);
  std::vector<std::string> outs(commands.size()), configs(commands.size());
  for (std::size_t i = 0; i < commands.size(); ++i) {
    commands[i].app->add_option("--out", outs[i], "Output directory; default $CTSF_OUTPUT_ROOT/<command>");
    commands[i].app->add_option("--config", configs[i], "key=value file supplying defaults for these options");
  }
  auto* replay_cmd = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  std::string manifest, replay_out;
  replay_cmd->add_option("manifest", manifest, "manifest.cfg of an earlier run")->required();
  replay_cmd->add_option("--out", replay_out, "Output directory for the new run");

  if (!args.empty())
    for (const auto& c : commands)
      if (c.app->get_name() == args.front()) cli::merge_config_file(*c.app, args);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    const CLI::App* sub = nullptr;
    for (const auto& c : commands)
      if (c.app->parsed()) sub = c.app;
    std::cerr << (sub ? sub->help() : app.help());
    return fail(cli::kExitUsage, e.what());
  }

  if (replay_cmd->parsed()) return replay(manifest, replay_out);

  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!commands[i].app->parsed()) continue;
    const std::filesystem::path out =
        outs[i].empty() ? cli::default_output_dir(commands[i].app->get_name()) : std::filesystem::path(outs[i]);
    cli::RunContext ctx(*commands[i].app, out);
    int code = 0;
    std::string reason;
    try {
      commands[i].run(ctx);
    } catch (const cli::ExitError& e) {
      code = e.code();
      reason = e.what();
    } catch (const ctsf::UsageError& e) {
      code = cli::kExitUsage;
      reason = e.what();
    } catch (const ctsf::NumericError& e) {
      code = cli::kExitNumeric;
      reason = e.what();
    } catch (const std::invalid_argument& e) {
      code = cli::kExitUsage;
      reason = e.what();
    } catch (const std::exception& e) {
      code = cli::kExitData;
      reason = e.what();
    }
    ctx.write_manifest(code, one_line(reason));
    return code == 0 ? 0 : fail(code, reason);
  }
  return fail(cli::kExitUsage, "no command given");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(std::vector<std::string>(argv + 1, argv + argc));
  } catch (const cli::ExitError& e) {
    return fail(e.code(), e.what());
  } catch (const std::exception& e) {
    return fail(cli::kExitData, e.what());
  }
}
