#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace dynrisk::cli {

enum ExitCode : int { kExitOk = 0, kExitResidual = 1, kExitSchema = 2, kExitCapacity = 3 };

struct RunOptions {
  std::string command;  // a task name, or "run" for every task in the config
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  bool timings = false;  // wall-clock timings make report.json non-reproducible
};

/// Executes the command, writes its files and report.json into the output
/// directory, and returns the exit status. Progress lines go to `log`.
int run(const RunOptions& options, std::ostream& log);

}  // namespace dynrisk::cli
