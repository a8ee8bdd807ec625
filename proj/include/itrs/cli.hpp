#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace itrs::cli {

enum ExitCode : int { kPass = 0, kMismatch = 1, kInputError = 2 };

/// Outcome of one command line. `data` always carries the command echo and
/// timing; `text` is the human-readable rendering used without --json.
struct Report {
  int exit_code = kPass;
  bool as_json = false;
  nlohmann::json data = nlohmann::json::object();
  std::string text;
  std::string error;

  /// What the executable prints on stdout.
  std::string render() const;
};

/// Runs one command. `args` excludes the program name.
Report run_command(const std::vector<std::string>& args);

}  // namespace itrs::cli
