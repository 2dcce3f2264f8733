#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace atrain::proc {

struct RunOptions {
  // Added to (or replacing entries of) the parent environment.
  std::vector<std::pair<std::string, std::string>> env;
  std::optional<std::filesystem::path> cwd;
  // Polled while the child runs; returning true kills the child.
  std::function<bool()> should_cancel;
};

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
  bool cancelled = false;
};

// Spawns argv[0] (absolute or relative path, no PATH lookup) and captures
// stdout/stderr. Throws atrain::Error(Io) if the process cannot be started.
RunResult run(const std::vector<std::string>& argv, const RunOptions& options = {});

// Resolves an executable: names containing a slash are checked directly,
// bare names are searched on PATH.
std::optional<std::filesystem::path> find_executable(std::string_view name);

}  // namespace atrain::proc
