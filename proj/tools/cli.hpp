#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ncp::cli {

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kConfig = 2,
  kData = 3,
  kBudget = 4,
};

struct CommandSpec {
  /// train | active-learn | sweep | eval | gen-toy
  std::string subcommand;
  std::string config_path;
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed;
  /// `dotted.key=value` strings applied after the config file.
  std::vector<std::string> overrides;
  /// Re-run from a previous manifest.json instead of a config file.
  std::string manifest_path;
  /// Checkpoint to evaluate (eval).
  std::string checkpoint_path;
  std::size_t jobs = 1;
};

/// Executes one command. Diagnostics go to `err` as a single line; progress to `out`.
int run_command(const CommandSpec& spec, std::ostream& out, std::ostream& err);

/// Parses argv into a CommandSpec and runs it. Unknown subcommands print usage and return kOther.
int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ncp::cli
