#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

namespace ctsf::cli {

inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

/// A failure that maps directly to an exit code.
class ExitError : public std::runtime_error {
 public:
  ExitError(int code, const std::string& message) : std::runtime_error(message), code_(code) {}
  int code() const { return code_; }

 private:
  int code_;
};

const char* exit_kind(int code);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Reads a flat key=value file; '#' starts a comment line.
KeyValues read_key_values(const std::filesystem::path& path);

/// Appends --key=value for every non-empty config-file entry that names an option of
/// `command` and is not already on the command line. Manifest bookkeeping
/// keys are skipped silently; other unknown keys produce a warning.
void merge_config_file(const CLI::App& command, std::vector<std::string>& args);

/// Output directory, manifest and bookkeeping for one command invocation.
class RunContext {
 public:
  RunContext(const CLI::App& command, std::filesystem::path output_dir);

  const std::filesystem::path& output_dir() const { return output_dir_; }
  /// Path inside the output directory, recorded as an output.
  std::filesystem::path output(const std::string& name);
  void record_input(const std::string& name, const std::filesystem::path& path);
  void note(const std::string& key, const std::string& value) { notes_.emplace_back(key, value); }

  /// Writes manifest.cfg; it doubles as a --config file for the same command.
  void write_manifest(int exit_code, const std::string& reason) const;

 private:
  std::string command_;
  KeyValues resolved_;
  KeyValues inputs_;
  KeyValues notes_;
  std::vector<std::string> outputs_;
  std::filesystem::path output_dir_;
};

/// Default output directory: $CTSF_OUTPUT_ROOT/<command>, or ctsf-runs/<command>.
std::filesystem::path default_output_dir(const std::string& command);

inline constexpr const char* kManifestName = "manifest.cfg";
inline constexpr const char* kVersion = CTSF_VERSION;

}  // namespace ctsf::cli
