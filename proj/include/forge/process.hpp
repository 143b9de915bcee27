#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace forge {

struct ProcessSpec {
  std::vector<std::string> argv;
  std::filesystem::path cwd;  // empty: inherit
  std::optional<std::chrono::milliseconds> timeout;
};

struct ProcessResult {
  int exit_code = -1;       // valid when exited normally
  int term_signal = 0;      // nonzero when killed by a signal
  bool timed_out = false;   // we killed it at the deadline
  bool spawn_failed = false;
  std::string out;
  std::string err;
  std::chrono::duration<double> elapsed{0};

  bool exited_cleanly() const { return !timed_out && term_signal == 0 && !spawn_failed; }
};

/// Runs a child in its own process group, capturing stdout and stderr.
/// On timeout the whole group is sent SIGKILL.
ProcessResult run_process(const ProcessSpec& spec);

/// Resolves `name` against PATH (or checks it directly when it contains '/').
std::optional<std::filesystem::path> find_executable(const std::string& name);

/// Splits a command string on whitespace. No quoting support.
std::vector<std::string> split_command(const std::string& command);

std::string describe_signal(int sig);

}  // namespace forge
