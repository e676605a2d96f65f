#include "run_context.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>

namespace ctsf::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

bool is_bookkeeping(const std::string& key) {
  return key == "command" || key == "version" || key == "status" || key == "exit_code" || key == "reason" ||
         key.starts_with("input.") || key.starts_with("output.") || key.starts_with("note.");
}

bool given_on_command_line(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args)
    if (a == flag || a.starts_with(flag + "=")) return true;
  return false;
}

}  // namespace

const char* exit_kind(int code) {
  switch (code) {
    case kExitUsage: return "usage";
    case kExitData: return "data";
    case kExitNumeric: return "numeric";
    default: return "ok";
  }
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ExitError(kExitData, "cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 15];
  }
  return hex;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ExitError(kExitUsage, "cannot read config file " + path.string());
  KeyValues out;
  std::string line;
  for (int number = 1; std::getline(in, line); ++number) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ExitError(kExitUsage, path.string() + ":" + std::to_string(number) + ": expected key=value");
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

void merge_config_file(const CLI::App& command, std::vector<std::string>& args) {
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].starts_with("--config=")) config = args[i].substr(9);
  }
  if (config.empty()) return;
  for (const auto& [key, value] : read_key_values(config)) {
    if (is_bookkeeping(key) || key == "config" || key == "out" || value.empty()) continue;
    if (!command.get_option_no_throw("--" + key)) {
      std::cerr << "warning: ignoring unknown config key '" << key << "'\n";
      continue;
    }
    if (!given_on_command_line(args, "--" + key)) args.push_back("--" + key + "=" + value);
  }
}

RunContext::RunContext(const CLI::App& command, std::filesystem::path output_dir)
    : command_(command.get_name()), output_dir_(std::move(output_dir)) {
  for (const CLI::Option* opt : command.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config" || name == "out") continue;
    std::string value;
    if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
      if (value.empty() && opt->get_expected_min() == 0) value = "false";
    }
    resolved_.emplace_back(name, value);
  }
  std::filesystem::create_directories(output_dir_);
}

std::filesystem::path RunContext::output(const std::string& name) {
  outputs_.push_back(name);
  return output_dir_ / name;
}

void RunContext::record_input(const std::string& name, const std::filesystem::path& path) {
  for (const auto& [k, v] : inputs_)
    if (k == "input." + name + ".path") return;
  inputs_.emplace_back("input." + name + ".path", path.string());
  inputs_.emplace_back("input." + name + ".sha256", sha256_file(path));
}

void RunContext::write_manifest(int exit_code, const std::string& reason) const {
  std::ofstream out(output_dir_ / kManifestName);
  out << "# ctsf run manifest; rerun with: ctsf " << command_ << " --config <this file> --out <dir>\n";
  out << "command=" << command_ << "\nversion=" << kVersion << "\nstatus=" << (exit_code == 0 ? "ok" : "failed")
      << "\nexit_code=" << exit_code << '\n';
  if (!reason.empty()) out << "reason=" << reason << '\n';
  for (const auto& [k, v] : resolved_) out << k << '=' << v << '\n';
  for (const auto& [k, v] : inputs_) out << k << '=' << v << '\n';
  for (const auto& name : outputs_) out << "output." << name << '=' << (output_dir_ / name).string() << '\n';
  for (const auto& [k, v] : notes_) out << "note." << k << '=' << v << '\n';
}

std::filesystem::path default_output_dir(const std::string& command) {
  const char* root = std::getenv("CTSF_OUTPUT_ROOT");
  return std::filesystem::path(root && *root ? root : "ctsf-runs") / command;
}

}  // namespace ctsf::cli
